#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>

#include "ptsearch/dataset.hpp"
#include "ptsearch/metrics.hpp"
#include "ptsearch/optim.hpp"
#include "ptsearch/pipeline.hpp"
#include "ptsearch/tape.hpp"

namespace ptsearch {

struct TrainConfig {
  int epochs = 100;
  double lr = 1e-3;
  double weight_decay = 2e-4;
  std::uint64_t seed = 1;
};

struct DivergedError : std::runtime_error {
  int epoch;
  explicit DivergedError(int at_epoch)
      : std::runtime_error("training diverged (non-finite loss) at epoch " + std::to_string(at_epoch)),
        epoch(at_epoch) {}
};

inline Matrix inference_logits(PipelineModel& model, const Dataset& data,
                               const FeatureMask& mask = {}) {
  Tape tape;
  ForwardTrace trace = forward(model, data.graph, data.features, tape, /*training=*/false,
                               nullptr, mask);
  return tape.value(trace.logits);
}

inline double accuracy_on(const Matrix& logits, const Dataset& data, Split split) {
  const ConfusionMatrix cm = confusion_matrix(logits, data.features.labels, data.split.rows(split));
  return double(cm.tp + cm.tn) / double(cm.total());
}

struct TrainResult {
  PipelineModel model;
  double val_accuracy = 0;
  double test_accuracy = 0;
};

// Full-graph training: one forward/backward over the train mask per epoch,
// Adam updates, no early stopping. The dataset must already be normalized.
inline TrainResult train_model(const Genotype& genotype, const Dataset& data,
                               const PipelineConfig& pcfg, const TrainConfig& tcfg,
                               const FeatureMask& mask = {}) {
  if (tcfg.epochs < 1) throw std::invalid_argument("train_model: epochs must be >= 1");
  if (tcfg.lr < 0) throw std::invalid_argument("train_model: negative learning rate");

  PipelineModel model = compile(genotype, data.meta, pcfg, derive_seed(tcfg.seed, 0));
  Rng dropout_rng(derive_seed(tcfg.seed, 1));
  const std::vector<int> train_rows = data.split.rows(Split::train);
  if (train_rows.empty()) throw DatasetError("train_model: train split is empty");
  if (data.split.count(Split::val) == 0 || data.split.count(Split::test) == 0)
    throw DatasetError("train_model: val and test splits must be non-empty");

  AdamConfig adam{tcfg.lr, 0.9, 0.999, 1e-8, tcfg.weight_decay};
  for (int epoch = 1; epoch <= tcfg.epochs; ++epoch) {
    Tape tape;
    ForwardTrace trace =
        forward(model, data.graph, data.features, tape, /*training=*/true, &dropout_rng, mask);
    ValueId loss = tape.cross_entropy(trace.logits, data.features.labels, train_rows);
    if (!std::isfinite(double(tape.value(loss).data[0]))) throw DivergedError(epoch);
    model.params.zero_grad();
    tape.backward(loss);
    adam_step(model.params, adam);
  }

  const Matrix logits = inference_logits(model, data, mask);
  if (!all_finite(logits)) throw DivergedError(tcfg.epochs);
  TrainResult result{std::move(model), 0, 0};
  result.val_accuracy = accuracy_on(logits, data, Split::val);
  result.test_accuracy = accuracy_on(logits, data, Split::test);
  return result;
}

}  // namespace ptsearch
