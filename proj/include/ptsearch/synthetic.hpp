#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <set>
#include <stdexcept>
#include <string>
#include <vector>

#include "ptsearch/dataset.hpp"
#include "ptsearch/graph.hpp"
#include "ptsearch/rng.hpp"

namespace ptsearch {

// Desk-scale stand-in for a real bot-detection export. Classes differ by
// (a) Gaussian text embeddings whose mean offset scales with `separation`,
// (b) degree asymmetry (bots follow many, are followed by few), and
// (c) biased categorical flags. All class signal scales with `separation`
// so separation=0 yields indistinguishable classes.
struct SyntheticConfig {
  int num_nodes = 1000;
  double bot_fraction = 0.5;
  int relation_count = 2;
  double separation = 3.0;
  std::uint64_t seed = 1;

  int dim_text = 16;  // desc and tweet embedding width
  int dim_numerical = 6;
  int dim_categorical = 11;
  double avg_out_degree = 6.0;
  double train_ratio = 0.7;
  double val_ratio = 0.2;
  double test_ratio = 0.1;
};

namespace detail {

inline std::vector<std::string> synthetic_relation_names(int count) {
  std::vector<std::string> names;
  for (int r = 0; r < count; ++r) {
    if (r == 0) names.push_back("follower");
    else if (r == 1) names.push_back("following");
    else names.push_back("rel" + std::to_string(r));
  }
  return names;
}

}  // namespace detail

inline void generate_synthetic(const SyntheticConfig& cfg, const std::filesystem::path& out_dir) {
  if (cfg.num_nodes < 20) throw std::invalid_argument("generate_synthetic: need at least 20 nodes");
  if (!(cfg.bot_fraction > 0.0 && cfg.bot_fraction < 1.0))
    throw std::invalid_argument("generate_synthetic: bot_fraction must be in (0,1)");
  if (cfg.separation < 0) throw std::invalid_argument("generate_synthetic: separation must be >= 0");
  if (cfg.relation_count < 1)
    throw std::invalid_argument("generate_synthetic: need at least one relation");

  const int n = cfg.num_nodes;
  // class-signal strength: 0 at separation 0, saturates at separation 3
  const double gamma = std::min(1.0, cfg.separation / 3.0);
  Rng rng(cfg.seed);

  // labels
  const int n_bots = static_cast<int>(std::llround(cfg.bot_fraction * n));
  if (n_bots < 3 || n - n_bots < 3)
    throw std::invalid_argument("generate_synthetic: each class needs at least 3 nodes");
  std::vector<int> order(n);
  for (int i = 0; i < n; ++i) order[i] = i;
  rng.shuffle(order);
  std::vector<int> labels(n, 0);
  for (int i = 0; i < n_bots; ++i) labels[order[i]] = 1;

  std::vector<int> bots, humans;
  for (int i = 0; i < n; ++i) (labels[i] == 1 ? bots : humans).push_back(i);

  // text embeddings: per-class Gaussian with mean distance = separation
  const double text_offset = cfg.separation / (2.0 * std::sqrt(double(cfg.dim_text)));
  auto sample_text = [&](Matrix& m) {
    m = Matrix(n, cfg.dim_text);
    for (int i = 0; i < n; ++i) {
      const double mu = labels[i] == 1 ? text_offset : -text_offset;
      for (int c = 0; c < cfg.dim_text; ++c) m.at(i, c) = real(rng.normal(mu, 1.0));
    }
  };

  FeatureBundle features;
  features.labels = labels;
  sample_text(features.desc);
  sample_text(features.tweet);

  // follow edges. Bots emit more edges than humans and rarely receive them
  // from humans, while bot-to-bot following stays common, so neighborhoods
  // carry class signal through mean aggregation. Both contrasts vanish at
  // gamma = 0.
  const double bot_out_rate = cfg.avg_out_degree * (1.0 + gamma);
  const double human_out_rate = cfg.avg_out_degree * std::max(0.1, 1.0 - 0.5 * gamma);
  const double p_bot_target_from_human = 0.5 - 0.48 * gamma;
  const double p_bot_target_from_bot = 0.5;
  std::vector<std::pair<int, int>> follows;  // (u, v): u follows v
  for (int u = 0; u < n; ++u) {
    const bool is_bot = labels[u] == 1;
    const double rate = is_bot ? bot_out_rate : human_out_rate;
    const double p_bot_target = is_bot ? p_bot_target_from_bot : p_bot_target_from_human;
    const int out_deg = std::min(n - 1, rng.poisson(rate));
    std::set<int> targets;
    int attempts = 0;
    while (static_cast<int>(targets.size()) < out_deg && attempts < 20 * out_deg + 100) {
      ++attempts;
      const std::vector<int>& pool = rng.bernoulli(p_bot_target) ? bots : humans;
      const int v = pool[rng.uniform_int(0, static_cast<int>(pool.size()) - 1)];
      if (v != u) targets.insert(v);
    }
    for (int v : targets) follows.emplace_back(u, v);
  }

  const std::vector<std::string> relations = detail::synthetic_relation_names(cfg.relation_count);
  std::vector<std::vector<std::pair<int, int>>> edges(relations.size());
  for (const auto& [u, v] : follows) {
    if (cfg.relation_count >= 1) edges[0].emplace_back(v, u);  // follower: v's follower-of edge
    if (cfg.relation_count >= 2) edges[1].emplace_back(u, v);  // following: u follows v
  }
  for (int r = 2; r < cfg.relation_count; ++r) {
    // extra relations get independent sparse random structure
    const int extra = n * 2;
    for (int e = 0; e < extra; ++e) {
      const int u = rng.uniform_int(0, n - 1);
      const int v = rng.uniform_int(0, n - 1);
      if (u != v) edges[r].emplace_back(u, v);
    }
  }
  HeteroGraph graph = HeteroGraph::build(n, relations, edges);

  // numerical block: degree-derived counts plus class-shifted activity stats
  std::vector<int> followers_count(n, 0), followings_count(n, 0);
  for (const auto& [u, v] : follows) {
    ++followings_count[u];
    ++followers_count[v];
  }
  features.numerical = Matrix(n, cfg.dim_numerical);
  struct ColSpec {
    double base, shift, sigma;
  };
  const std::vector<ColSpec> activity = {
      {100.0, -40.0, 30.0},  // favorites
      {200.0, 80.0, 60.0},   // statuses
      {900.0, -350.0, 250.0},  // active days
      {10.0, 3.0, 2.5},      // screen-name length
  };
  for (int i = 0; i < n; ++i) {
    const double cls = labels[i] == 1 ? 1.0 : 0.0;
    int c = 0;
    if (c < cfg.dim_numerical) features.numerical.at(i, c++) = real(followers_count[i]);
    if (c < cfg.dim_numerical) features.numerical.at(i, c++) = real(followings_count[i]);
    for (const ColSpec& spec : activity) {
      if (c >= cfg.dim_numerical) break;
      features.numerical.at(i, c++) = real(rng.normal(spec.base + gamma * spec.shift * cls, spec.sigma));
    }
    while (c < cfg.dim_numerical) features.numerical.at(i, c++) = real(rng.normal(0.0, 1.0));
  }

  // categorical block: a few flags biased by class, the rest neutral
  features.categorical = Matrix(n, cfg.dim_categorical);
  struct FlagSpec {
    double base, shift;
  };
  const std::vector<FlagSpec> flags = {
      {0.55, 0.35},   // default profile
      {0.30, -0.25},  // verified
      {0.50, -0.30},  // geo enabled
      {0.40, 0.35},   // background tile
  };
  for (int i = 0; i < n; ++i) {
    const double cls = labels[i] == 1 ? 1.0 : 0.0;
    for (int c = 0; c < cfg.dim_categorical; ++c) {
      double p = 0.5;
      if (c < static_cast<int>(flags.size()))
        p = std::clamp(flags[c].base + gamma * flags[c].shift * cls, 0.02, 0.98);
      features.categorical.at(i, c) = rng.bernoulli(p) ? real(1) : real(0);
    }
  }

  SplitAssignment split = stratified_split(labels, cfg.train_ratio, cfg.val_ratio, cfg.test_ratio,
                                           derive_seed(cfg.seed, 99));

  DatasetMeta meta;
  meta.num_nodes = n;
  meta.relations = relations;
  meta.dim_desc = cfg.dim_text;
  meta.dim_tweet = cfg.dim_text;
  meta.dim_numerical = cfg.dim_numerical;
  meta.dim_categorical = cfg.dim_categorical;

  save_dataset(out_dir, graph, features, &split, meta);
}

}  // namespace ptsearch
