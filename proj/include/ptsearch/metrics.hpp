#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <vector>

#include "ptsearch/matrix.hpp"

namespace ptsearch {

// Bots (label 1) are the positive class.
struct ConfusionMatrix {
  std::int64_t tp = 0;
  std::int64_t fp = 0;
  std::int64_t tn = 0;
  std::int64_t fn = 0;

  std::int64_t total() const { return tp + fp + tn + fn; }
};

// Prediction is the argmax over the two logits; ties go to class 0 (human).
inline ConfusionMatrix confusion_matrix(const Matrix& logits, const std::vector<int>& labels,
                                        const std::vector<int>& rows) {
  if (rows.empty()) throw std::invalid_argument("confusion_matrix: empty mask");
  if (logits.cols != 2) throw std::invalid_argument("confusion_matrix: expected 2 logit columns");
  ConfusionMatrix cm;
  for (int i : rows) {
    const int pred = logits.at(i, 1) > logits.at(i, 0) ? 1 : 0;
    const int label = labels[i];
    if (label != 0 && label != 1)
      throw std::invalid_argument("confusion_matrix: masked node is unlabeled");
    if (label == 1) (pred == 1 ? cm.tp : cm.fn)++;
    else (pred == 1 ? cm.fp : cm.tn)++;
  }
  return cm;
}

struct MetricsReport {
  double accuracy = 0;
  double f1 = 0;
  double precision = 0;
  double recall = 0;
  double specificity = 0;
  double mcc = 0;
  bool degenerate = false;  // some metric had a zero denominator and was reported as 0
};

inline MetricsReport compute_metrics(const ConfusionMatrix& cm) {
  if (cm.total() <= 0) throw std::invalid_argument("compute_metrics: empty confusion matrix");
  MetricsReport r;
  const double tp = double(cm.tp), fp = double(cm.fp), tn = double(cm.tn), fn = double(cm.fn);

  auto ratio = [&r](double num, double den) {
    if (den == 0) {
      r.degenerate = true;
      return 0.0;
    }
    return num / den;
  };

  r.accuracy = (tp + tn) / double(cm.total());
  r.precision = ratio(tp, tp + fp);
  r.recall = ratio(tp, tp + fn);
  r.specificity = ratio(tn, tn + fp);
  r.f1 = ratio(2.0 * r.precision * r.recall, r.precision + r.recall);
  const double mcc_den = std::sqrt((tp + fp) * (tp + fn) * (tn + fp) * (tn + fn));
  r.mcc = ratio(tp * tn - fp * fn, mcc_den);
  return r;
}

}  // namespace ptsearch
