#pragma once

#include <cmath>
#include <cstdio>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptsearch/dataset.hpp"
#include "ptsearch/metrics.hpp"
#include "ptsearch/trainer.hpp"

namespace ptsearch {

inline const std::vector<std::string>& metric_names() {
  static const std::vector<std::string> names = {"accuracy", "f1",          "precision",
                                                 "recall",   "specificity", "mcc"};
  return names;
}

inline double metric_value(const MetricsReport& r, const std::string& name) {
  if (name == "accuracy") return r.accuracy;
  if (name == "f1") return r.f1;
  if (name == "precision") return r.precision;
  if (name == "recall") return r.recall;
  if (name == "specificity") return r.specificity;
  return r.mcc;
}

struct MetricStats {
  double mean = 0;
  double stddev = 0;  // population std; a single run reports 0
  std::vector<double> values;
};

struct AggregateReport {
  std::string label;
  int runs_requested = 0;
  int runs_completed = 0;
  int runs_diverged = 0;
  std::vector<MetricStats> metrics;  // parallel to metric_names()
};

inline AggregateReport aggregate_runs(const std::string& label,
                                      const std::vector<MetricsReport>& completed,
                                      int requested, int diverged) {
  AggregateReport agg;
  agg.label = label;
  agg.runs_requested = requested;
  agg.runs_completed = static_cast<int>(completed.size());
  agg.runs_diverged = diverged;
  for (const std::string& name : metric_names()) {
    MetricStats stats;
    for (const MetricsReport& r : completed) stats.values.push_back(metric_value(r, name));
    if (!stats.values.empty()) {
      double sum = 0;
      for (double v : stats.values) sum += v;
      stats.mean = sum / double(stats.values.size());
      double var = 0;
      for (double v : stats.values) var += (v - stats.mean) * (v - stats.mean);
      stats.stddev = std::sqrt(var / double(stats.values.size()));
    }
    agg.metrics.push_back(std::move(stats));
  }
  return agg;
}

struct RepeatedRunResult {
  AggregateReport report;
  std::optional<PipelineModel> first_model;
};

// Retrains one genotype under `runs` seeds (base seed, base+1, ...) and
// aggregates test-split metrics. Diverged runs are flagged and excluded
// from the aggregates.
inline RepeatedRunResult run_repeated(const std::string& label, const Genotype& genotype,
                                      const Dataset& data, const PipelineConfig& pcfg,
                                      const TrainConfig& base_cfg, int runs,
                                      const FeatureMask& mask = {},
                                      bool keep_first_model = false) {
  if (runs < 1) throw std::invalid_argument("run_repeated: runs must be >= 1");
  RepeatedRunResult result;
  std::vector<MetricsReport> completed;
  int diverged = 0;
  for (int i = 0; i < runs; ++i) {
    TrainConfig cfg = base_cfg;
    cfg.seed = base_cfg.seed + std::uint64_t(i);
    try {
      TrainResult tr = train_model(genotype, data, pcfg, cfg, mask);
      const Matrix logits = inference_logits(tr.model, data, mask);
      completed.push_back(
          compute_metrics(confusion_matrix(logits, data.features.labels, data.split.rows(Split::test))));
      if (keep_first_model && !result.first_model) result.first_model = std::move(tr.model);
    } catch (const DivergedError&) {
      ++diverged;
    }
  }
  result.report = aggregate_runs(label, completed, runs, diverged);
  return result;
}

// Final-training sweep over the best genotypes found by the search.
inline std::vector<AggregateReport> run_final(const std::vector<Genotype>& genotypes,
                                              const Dataset& data, const PipelineConfig& pcfg,
                                              const TrainConfig& cfg, int runs) {
  if (genotypes.empty()) throw std::invalid_argument("run_final: no genotypes");
  std::vector<AggregateReport> out;
  for (std::size_t i = 0; i < genotypes.size(); ++i)
    out.push_back(
        run_repeated(genotypes[i].str(), genotypes[i], data, pcfg, cfg, runs).report);
  return out;
}

enum class AblationMode { features, gate, skip };

struct AblationArm {
  std::string label;
  FeatureMask mask;
  bool gate_enabled = true;
  bool skip_enabled = true;
};

inline std::vector<AblationArm> ablation_arms(AblationMode mode) {
  std::vector<AblationArm> arms;
  auto mask = [](bool d, bool t, bool n, bool c) { return FeatureMask{d, t, n, c}; };
  switch (mode) {
    case AblationMode::features:
      arms.push_back({"full", mask(1, 1, 1, 1)});
      arms.push_back({"w/o description", mask(0, 1, 1, 1)});
      arms.push_back({"w/o tweets", mask(1, 0, 1, 1)});
      arms.push_back({"w/o numerical", mask(1, 1, 0, 1)});
      arms.push_back({"w/o categorical", mask(1, 1, 1, 0)});
      arms.push_back({"des + tweets", mask(1, 1, 0, 0)});
      arms.push_back({"cat + num", mask(0, 0, 1, 1)});
      arms.push_back({"only description", mask(1, 0, 0, 0)});
      arms.push_back({"only tweets", mask(0, 1, 0, 0)});
      arms.push_back({"only numerical", mask(0, 0, 1, 0)});
      arms.push_back({"only categorical", mask(0, 0, 0, 1)});
      break;
    case AblationMode::gate:
      arms.push_back({"with gate", mask(1, 1, 1, 1), true, true});
      arms.push_back({"without gate", mask(1, 1, 1, 1), false, true});
      break;
    case AblationMode::skip:
      arms.push_back({"with skip", mask(1, 1, 1, 1), true, true});
      arms.push_back({"without skip", mask(1, 1, 1, 1), true, false});
      break;
  }
  return arms;
}

// Trains the fixed genotype under every arm of the requested grid with the
// same seeds, so rows differ only in the ablated component.
inline std::vector<AggregateReport> run_ablation(AblationMode mode, const Genotype& genotype,
                                                 const Dataset& data, const PipelineConfig& base_pcfg,
                                                 const TrainConfig& cfg, int runs) {
  std::vector<AggregateReport> out;
  for (const AblationArm& arm : ablation_arms(mode)) {
    PipelineConfig pcfg = base_pcfg;
    pcfg.gate_enabled = arm.gate_enabled;
    pcfg.skip_enabled = arm.skip_enabled;
    out.push_back(run_repeated(arm.label, genotype, data, pcfg, cfg, runs, arm.mask).report);
  }
  return out;
}

inline nlohmann::json report_to_json(const AggregateReport& report) {
  nlohmann::json metrics = nlohmann::json::object();
  for (std::size_t i = 0; i < metric_names().size(); ++i) {
    metrics[metric_names()[i]] = {{"mean", report.metrics[i].mean},
                                  {"std", report.metrics[i].stddev},
                                  {"values", report.metrics[i].values}};
  }
  return nlohmann::json{{"label", report.label},
                        {"runs", report.runs_requested},
                        {"completed", report.runs_completed},
                        {"diverged", report.runs_diverged},
                        {"metrics", metrics}};
}

// Aligned-column text table, one row per report, "mean ± std" cells.
inline std::string format_table(const std::vector<AggregateReport>& reports) {
  const std::vector<std::string> headers = {"Model",  "Accuracy",    "F1-score", "Precision",
                                            "Recall", "Specificity", "MCC"};
  auto cell = [](const MetricStats& s) {
    char buf[64];
    std::snprintf(buf, sizeof(buf), "%.3f ± %.3f", s.mean, s.stddev);
    return std::string(buf);
  };
  std::vector<std::vector<std::string>> rows;
  for (const AggregateReport& r : reports) {
    std::vector<std::string> row{r.label};
    for (const MetricStats& s : r.metrics) row.push_back(cell(s));
    if (r.runs_diverged > 0) row[0] += " [" + std::to_string(r.runs_diverged) + " diverged]";
    rows.push_back(std::move(row));
  }
  std::vector<std::size_t> widths(headers.size());
  for (std::size_t c = 0; c < headers.size(); ++c) widths[c] = headers[c].size();
  for (const auto& row : rows)
    for (std::size_t c = 0; c < row.size(); ++c) {
      // the ± sign is a two-byte UTF-8 sequence; count display columns
      std::size_t display = row[c].size();
      if (row[c].find("±") != std::string::npos) display -= 1;
      widths[c] = std::max(widths[c], display);
    }
  auto pad = [](const std::string& s, std::size_t w, std::size_t display) {
    return s + std::string(w > display ? w - display : 0, ' ');
  };
  std::string out;
  for (std::size_t c = 0; c < headers.size(); ++c) {
    out += pad(headers[c], widths[c], headers[c].size());
    out += (c + 1 < headers.size()) ? "  " : "";
  }
  out += "\n";
  for (std::size_t c = 0; c < headers.size(); ++c) {
    out += std::string(widths[c], '-');
    out += (c + 1 < headers.size()) ? "  " : "";
  }
  out += "\n";
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      std::size_t display = row[c].size();
      if (row[c].find("±") != std::string::npos) display -= 1;
      out += pad(row[c], widths[c], display);
      out += (c + 1 < row.size()) ? "  " : "";
    }
    out += "\n";
  }
  return out;
}

}  // namespace ptsearch
