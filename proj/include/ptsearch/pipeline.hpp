#pragma once

#include <cmath>
#include <cstdint>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "ptsearch/dataset.hpp"
#include "ptsearch/genotype.hpp"
#include "ptsearch/graph.hpp"
#include "ptsearch/matrix.hpp"
#include "ptsearch/optim.hpp"
#include "ptsearch/rng.hpp"
#include "ptsearch/tape.hpp"

namespace ptsearch {

// P layers either purely average neighbor messages (identity weights) or
// apply a trainable per-relation map inside the aggregation.
enum class PWeights { identity, relational };

inline const char* to_string(PWeights p) {
  return p == PWeights::identity ? "identity" : "relational";
}

struct PipelineConfig {
  int hidden_dim = 32;  // D; must be divisible by 4 (one quarter per feature block)
  PWeights p_weights = PWeights::identity;
  bool gate_enabled = true;
  bool skip_enabled = true;
  real leaky_slope = real(0.01);
  real dropout_feature = real(0.5);
  real dropout_gnn = real(0.8);
};

// Feature-subset selector for ablations; unselected blocks contribute
// all-zero encoder segments so the architecture shape never changes.
struct FeatureMask {
  bool desc = true;
  bool tweet = true;
  bool numerical = true;
  bool categorical = true;

  int count() const { return int(desc) + int(tweet) + int(numerical) + int(categorical); }
};

struct PipelineModel {
  Genotype genotype;
  DatasetMeta dims;
  PipelineConfig config;
  std::uint64_t seed = 0;
  ParamStore params;
};

namespace detail {

inline Matrix init_weight(int fan_in, int fan_out, Rng& rng) {
  const double bound = std::sqrt(6.0 / double(fan_in));
  Matrix m(fan_in, fan_out);
  for (real& v : m.data) v = real(rng.uniform(-bound, bound));
  return m;
}

inline Matrix init_bias(int fan_in, int fan_out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(double(fan_in));
  Matrix m(1, fan_out);
  for (real& v : m.data) v = real(rng.uniform(-bound, bound));
  return m;
}

inline std::string layer_prefix(int layer) { return "layer" + std::to_string(layer); }

}  // namespace detail

// Builds the full parameter set for one genotype. Creation order is fixed
// (encoder, gate, layers in genotype order, head) so a seed fully determines
// the initial values and the parameter count is a function of
// (genotype, dims, config).
inline PipelineModel compile(const Genotype& genotype, const DatasetMeta& dims,
                             const PipelineConfig& config, std::uint64_t seed) {
  if (config.hidden_dim <= 0 || config.hidden_dim % 4 != 0)
    throw std::invalid_argument("compile: hidden_dim must be positive and divisible by 4");

  PipelineModel model;
  model.genotype = genotype;
  model.dims = dims;
  model.config = config;
  model.seed = seed;

  Rng rng(seed);
  ParamStore& p = model.params;
  const int d = config.hidden_dim;
  const int seg = d / 4;
  const int num_rel = static_cast<int>(dims.relations.size());

  const std::pair<const char*, int> blocks[] = {{"desc", dims.dim_desc},
                                                {"tweet", dims.dim_tweet},
                                                {"numerical", dims.dim_numerical},
                                                {"categorical", dims.dim_categorical}};
  for (const auto& [name, in_dim] : blocks) {
    p.create(std::string("encoder.") + name + ".weight", detail::init_weight(in_dim, seg, rng));
    p.create(std::string("encoder.") + name + ".bias", detail::init_bias(std::max(in_dim, 1), seg, rng));
  }

  // one score vector shared by every gate application
  {
    const double bound = 1.0 / std::sqrt(double(d));
    Matrix s(d, 1);
    for (real& v : s.data) v = real(rng.uniform(-bound, bound));
    p.create("gate.score", std::move(s));
  }

  for (int l = 1; l <= genotype.length(); ++l) {
    const std::string prefix = detail::layer_prefix(l);
    if (genotype.op(l) == 'T') {
      p.create(prefix + ".transform.root", detail::init_weight(d, d, rng));
      for (int r = 0; r < num_rel; ++r)
        p.create(prefix + ".transform.rel" + std::to_string(r), detail::init_weight(d, d, rng));
      p.create(prefix + ".transform.bias", detail::init_bias(d, d, rng));
    } else if (config.p_weights == PWeights::relational) {
      for (int r = 0; r < num_rel; ++r)
        p.create(prefix + ".propagate.rel" + std::to_string(r), detail::init_weight(d, d, rng));
    }
  }

  p.create("head.hidden.weight", detail::init_weight(d, d, rng));
  p.create("head.hidden.bias", detail::init_bias(d, d, rng));
  p.create("head.out.weight", detail::init_weight(d, 2, rng));
  p.create("head.out.bias", detail::init_bias(d, 2, rng));
  return model;
}

// Projects each selected feature block to D/4, applies leaky-ReLU, and
// concatenates [desc; tweet; numerical; categorical]. Unselected blocks
// contribute zero segments.
inline ValueId encode_features(PipelineModel& model, const FeatureBundle& bundle, Tape& tape,
                               const FeatureMask& mask = {}) {
  if (mask.count() == 0) throw std::invalid_argument("encode_features: all feature blocks dropped");
  const int n = bundle.num_nodes();
  const int seg = model.config.hidden_dim / 4;

  struct Block {
    const char* name;
    const Matrix* input;
    bool selected;
  };
  const Block blocks[] = {{"desc", &bundle.desc, mask.desc},
                          {"tweet", &bundle.tweet, mask.tweet},
                          {"numerical", &bundle.numerical, mask.numerical},
                          {"categorical", &bundle.categorical, mask.categorical}};
  std::vector<ValueId> segments;
  for (const Block& b : blocks) {
    if (!b.selected) {
      segments.push_back(tape.constant(Matrix::zeros(n, seg)));
      continue;
    }
    if (b.input->rows != n)
      throw std::invalid_argument(std::string("encode_features: ") + b.name + " block row mismatch");
    ValueId x = tape.constant(*b.input);
    ValueId w = tape.param(model.params, std::string("encoder.") + b.name + ".weight");
    ValueId bias = tape.param(model.params, std::string("encoder.") + b.name + ".bias");
    segments.push_back(tape.leaky_relu(tape.affine(x, w, bias), model.config.leaky_slope));
  }
  return tape.concat_cols(segments);
}

// One propagation step: per-relation in-neighbor mean, summed over relations.
// In relational mode each relation's aggregate passes through its own weight.
inline ValueId propagate(PipelineModel& model, ValueId h, const HeteroGraph& graph, Tape& tape,
                         int layer) {
  ValueId acc = -1;
  for (int r = 0; r < graph.num_relations(); ++r) {
    ValueId part = tape.neighbor_mean(h, graph, r);
    if (model.config.p_weights == PWeights::relational) {
      ValueId w = tape.param(model.params,
                             detail::layer_prefix(layer) + ".propagate.rel" + std::to_string(r));
      part = tape.matmul(part, w);
    }
    acc = (acc < 0) ? part : tape.add(acc, part);
  }
  return acc;
}

// Node-adaptive mixture of propagated embeddings: per node, score each
// candidate layer with sigmoid(score_vector . source), softmax the scores
// across candidates, and mix the pre-outputs with those weights.
// score_sources and mix_inputs run over the same layer list.
inline std::pair<ValueId, ValueId> gate_combine(PipelineModel& model,
                                                const std::vector<ValueId>& score_sources,
                                                const std::vector<ValueId>& mix_inputs,
                                                Tape& tape) {
  if (mix_inputs.empty() || score_sources.size() != mix_inputs.size())
    throw std::invalid_argument("gate_combine: need matching non-empty input lists");
  ValueId s = tape.param(model.params, "gate.score");
  std::vector<ValueId> scores;
  scores.reserve(score_sources.size());
  for (ValueId src : score_sources) scores.push_back(tape.sigmoid(tape.matmul(src, s)));
  ValueId weights = tape.softmax_rows(tape.concat_cols(scores));
  ValueId mixed = tape.mix_rows(mix_inputs, weights);
  return {mixed, weights};
}

// T layers whose outputs join the skip sum at `layer`: everything strictly
// before the most recent T layer preceding `layer`. Empty when `layer` is
// the pipeline's first T.
inline std::vector<int> skip_sum_layers(const std::vector<int>& prior_t_layers, int layer) {
  int last_t = -1;
  for (int idx : prior_t_layers)
    if (idx < layer) last_t = std::max(last_t, idx);
  std::vector<int> out;
  if (last_t >= 0)
    for (int idx : prior_t_layers)
      if (idx < last_t) out.push_back(idx);
  return out;
}

// Skip input of a T layer: the previous layer's output plus the outputs of
// the skip_sum_layers. t_history holds (layer index, output) for every
// completed T layer, oldest first.
inline ValueId skip_collect(ValueId prev_output,
                            const std::vector<std::pair<int, ValueId>>& t_history, int layer,
                            Tape& tape) {
  std::vector<int> prior;
  prior.reserve(t_history.size());
  for (const auto& [idx, id] : t_history) prior.push_back(idx);
  ValueId acc = prev_output;
  for (int want : skip_sum_layers(prior, layer))
    for (const auto& [idx, id] : t_history)
      if (idx == want) acc = tape.add(acc, id);
  return acc;
}

// One transformation step: root map plus per-relation maps plus bias,
// through leaky-ReLU.
inline ValueId transform(PipelineModel& model, ValueId z, Tape& tape, int layer) {
  const std::string prefix = detail::layer_prefix(layer);
  ValueId w_root = tape.param(model.params, prefix + ".transform.root");
  ValueId bias = tape.param(model.params, prefix + ".transform.bias");
  ValueId acc = tape.affine(z, w_root, bias);
  for (std::size_t r = 0; r < model.dims.relations.size(); ++r) {
    ValueId w = tape.param(model.params, prefix + ".transform.rel" + std::to_string(r));
    acc = tape.add(acc, tape.matmul(z, w));
  }
  return tape.leaky_relu(acc, model.config.leaky_slope);
}

struct GateApplication {
  int layer;                      // layer whose output the gate produced
  std::vector<int> member_layers; // P layers mixed together
  ValueId weights;                // N x members softmax weights
};

struct ForwardTrace {
  ValueId logits = -1;
  std::vector<ValueId> layer_outputs;  // o[0..L], o[0] = encoder output
  std::vector<ValueId> pre_outputs;    // z[1..L]; index 0 unused (-1)
  std::vector<GateApplication> gates;
};

// Full forward pass: encoder, layers in genotype order with gate/skip wiring,
// classifier head. A pipeline ending in P is gated as if followed by T so the
// head always consumes a combined embedding. Dropout fires only in training.
inline ForwardTrace forward(PipelineModel& model, const HeteroGraph& graph,
                            const FeatureBundle& bundle, Tape& tape, bool training = false,
                            Rng* rng = nullptr, const FeatureMask& mask = {}) {
  const Genotype& g = model.genotype;
  const int len = g.length();
  ForwardTrace trace;
  trace.layer_outputs.assign(len + 1, -1);
  trace.pre_outputs.assign(len + 1, -1);

  ValueId encoded = encode_features(model, bundle, tape, mask);
  trace.layer_outputs[0] = tape.dropout(encoded, model.config.dropout_feature, training, rng);

  std::vector<std::pair<int, ValueId>> p_outputs;      // (layer, o) for P layers
  std::vector<std::pair<int, ValueId>> p_pre_outputs;  // (layer, z) for P layers
  std::vector<std::pair<int, ValueId>> t_outputs;      // (layer, o) for T layers

  for (int l = 1; l <= len; ++l) {
    const ValueId prev = trace.layer_outputs[l - 1];
    if (g.op(l) == 'P') {
      ValueId z = propagate(model, prev, graph, tape, l);
      trace.pre_outputs[l] = z;
      p_pre_outputs.emplace_back(l, z);
      const bool followed_by_t = (l == len) || g.op(l + 1) == 'T';
      ValueId out = z;
      if (model.config.gate_enabled && followed_by_t) {
        std::vector<ValueId> score_sources, mix_inputs;
        std::vector<int> members;
        for (std::size_t i = 0; i < p_pre_outputs.size(); ++i) {
          members.push_back(p_pre_outputs[i].first);
          mix_inputs.push_back(p_pre_outputs[i].second);
          // score from the cached layer output; the current layer's output is
          // what the gate is producing, so its score falls back to z
          score_sources.push_back(i + 1 < p_pre_outputs.size() ? p_outputs[i].second : z);
        }
        auto [mixed, weights] = gate_combine(model, score_sources, mix_inputs, tape);
        out = mixed;
        trace.gates.push_back({l, std::move(members), weights});
      }
      trace.layer_outputs[l] = out;
      p_outputs.emplace_back(l, out);
    } else {
      ValueId z = model.config.skip_enabled ? skip_collect(prev, t_outputs, l, tape) : prev;
      trace.pre_outputs[l] = z;
      ValueId activated = transform(model, z, tape, l);
      ValueId out = tape.dropout(activated, model.config.dropout_gnn, training, rng);
      trace.layer_outputs[l] = out;
      t_outputs.emplace_back(l, out);
    }
  }

  ValueId head_in = trace.layer_outputs[len];
  ValueId hidden = tape.leaky_relu(
      tape.affine(head_in, tape.param(model.params, "head.hidden.weight"),
                  tape.param(model.params, "head.hidden.bias")),
      model.config.leaky_slope);
  trace.logits = tape.affine(hidden, tape.param(model.params, "head.out.weight"),
                             tape.param(model.params, "head.out.bias"));
  return trace;
}

}  // namespace ptsearch
