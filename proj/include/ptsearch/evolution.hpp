#pragma once

#include <algorithm>
#include <chrono>
#include <cstdint>
#include <functional>
#include <mutex>
#include <stdexcept>
#include <string>
#include <thread>
#include <unordered_set>
#include <utility>
#include <vector>

#include "ptsearch/genotype.hpp"
#include "ptsearch/rng.hpp"

namespace ptsearch {

enum class MutationKind { add_p, add_t, p_to_t, t_to_p };

inline const char* to_string(MutationKind k) {
  switch (k) {
    case MutationKind::add_p: return "add_p";
    case MutationKind::add_t: return "add_t";
    case MutationKind::p_to_t: return "p_to_t";
    default: return "t_to_p";
  }
}

struct Individual {
  Genotype genotype;
  double val_accuracy = 0;
  double test_accuracy = 0;
  std::int64_t birth_index = -1;
  bool diverged = false;
};

// ordered by birth_index; the front is always the oldest member
using Population = std::vector<Individual>;

struct SearchConfig {
  int population_size = 15;  // k
  int tournament_size = 3;   // m
  int generations = 80;      // T
  int init_len_min = 2;
  int init_len_max = 8;
  int max_genotype_len = 20;
  std::uint64_t seed = 1;
  int workers = 1;  // >1 evaluates candidates concurrently; determinism holds only at 1
};

struct SearchRecord {
  int generation = 0;   // 0 for the initial population
  std::string parent;   // empty for init records
  std::string mutation; // "init" or a MutationKind name
  std::string child;
  double val_acc = 0;
  double test_acc = 0;
  bool diverged = false;
  double seconds = 0;
};

struct SearchLog {
  std::vector<SearchRecord> records;
};

struct EvalOutcome {
  double val_accuracy = 0;
  double test_accuracy = 0;
  bool diverged = false;
};

// Trains and scores one genotype; seed is the per-candidate training seed.
using Evaluator = std::function<EvalOutcome(const Genotype&, std::uint64_t)>;

inline Genotype random_genotype(int len_min, int len_max, Rng& rng) {
  const int len = rng.uniform_int(len_min, len_max);
  std::string ops;
  for (int i = 0; i < len; ++i) ops.push_back(rng.bernoulli(0.5) ? 'P' : 'T');
  return Genotype{std::move(ops)};
}

// Applies one mutation kind; caller guarantees applicability.
inline Genotype apply_mutation(const Genotype& g, MutationKind kind, Rng& rng) {
  std::string ops = g.str();
  switch (kind) {
    case MutationKind::add_p: ops.push_back('P'); break;
    case MutationKind::add_t: ops.push_back('T'); break;
    case MutationKind::p_to_t:
    case MutationKind::t_to_p: {
      const char want = kind == MutationKind::p_to_t ? 'P' : 'T';
      std::vector<int> slots;
      for (std::size_t i = 0; i < ops.size(); ++i)
        if (ops[i] == want) slots.push_back(static_cast<int>(i));
      if (slots.empty()) throw std::logic_error("apply_mutation: no position of the required type");
      ops[slots[rng.uniform_int(0, static_cast<int>(slots.size()) - 1)]] =
          (want == 'P') ? 'T' : 'P';
      break;
    }
  }
  return Genotype{std::move(ops)};
}

// Uniformly picks one of the four kinds; if it is inapplicable (no position of
// the required type, or an append would exceed max_len) resamples uniformly
// among the applicable kinds. The child differs from the parent by one edit.
inline std::pair<Genotype, MutationKind> mutate(const Genotype& g, Rng& rng, int max_len) {
  const bool has_p = g.str().find('P') != std::string::npos;
  const bool has_t = g.str().find('T') != std::string::npos;
  const bool can_append = g.length() < max_len;

  auto applicable = [&](MutationKind k) {
    switch (k) {
      case MutationKind::add_p:
      case MutationKind::add_t: return can_append;
      case MutationKind::p_to_t: return has_p;
      default: return has_t;
    }
  };

  const MutationKind all[] = {MutationKind::add_p, MutationKind::add_t, MutationKind::p_to_t,
                              MutationKind::t_to_p};
  MutationKind kind = all[rng.uniform_int(0, 3)];
  if (!applicable(kind)) {
    std::vector<MutationKind> ok;
    for (MutationKind k : all)
      if (applicable(k)) ok.push_back(k);
    if (ok.empty()) throw std::logic_error("mutate: no applicable mutation");
    kind = ok[rng.uniform_int(0, static_cast<int>(ok.size()) - 1)];
  }
  return {apply_mutation(g, kind, rng), kind};
}

// Tournament selection: m members sampled without replacement, highest
// validation accuracy wins, ties broken by lower birth index.
inline const Individual& sample_parent(const Population& population, int m, Rng& rng) {
  if (population.empty()) throw std::invalid_argument("sample_parent: empty population");
  if (m < 1 || m > static_cast<int>(population.size()))
    throw std::invalid_argument("sample_parent: tournament size out of range");
  std::vector<int> idx(population.size());
  for (std::size_t i = 0; i < idx.size(); ++i) idx[i] = static_cast<int>(i);
  // partial Fisher-Yates: the first m entries are a sample without replacement
  for (int i = 0; i < m; ++i)
    std::swap(idx[i], idx[rng.uniform_int(i, static_cast<int>(idx.size()) - 1)]);
  const Individual* best = &population[idx[0]];
  for (int i = 1; i < m; ++i) {
    const Individual& cand = population[idx[i]];
    if (cand.val_accuracy > best->val_accuracy ||
        (cand.val_accuracy == best->val_accuracy && cand.birth_index < best->birth_index))
      best = &cand;
  }
  return *best;
}

namespace detail {

inline std::uint64_t candidate_seed(const SearchConfig& cfg, std::int64_t birth_index) {
  return derive_seed(cfg.seed, 1000 + std::uint64_t(birth_index));
}

inline double evaluate_into(Individual& ind, const Evaluator& evaluate, std::uint64_t seed) {
  using clock = std::chrono::steady_clock;
  const auto start = clock::now();
  const EvalOutcome out = evaluate(ind.genotype, seed);
  ind.val_accuracy = out.diverged ? 0.0 : out.val_accuracy;
  ind.test_accuracy = out.diverged ? 0.0 : out.test_accuracy;
  ind.diverged = out.diverged;
  return std::chrono::duration<double>(clock::now() - start).count();
}

inline void record(SearchLog& log, int generation, const std::string& parent,
                   const std::string& mutation, const Individual& child, double seconds) {
  log.records.push_back(SearchRecord{generation, parent, mutation, child.genotype.str(),
                                     child.val_accuracy, child.test_accuracy, child.diverged,
                                     seconds});
}

// distinct genotypes when possible; duplicates allowed after 100 rejections
inline std::vector<Genotype> sample_initial_genotypes(const SearchConfig& cfg, Rng& rng) {
  std::vector<Genotype> init;
  std::unordered_set<std::string> seen;
  while (static_cast<int>(init.size()) < cfg.population_size) {
    Genotype g = random_genotype(cfg.init_len_min, cfg.init_len_max, rng);
    int tries = 0;
    while (seen.count(g.str()) && tries < 100) {
      g = random_genotype(cfg.init_len_min, cfg.init_len_max, rng);
      ++tries;
    }
    seen.insert(g.str());
    init.push_back(std::move(g));
  }
  return init;
}

}  // namespace detail

// Samples k genotypes (distinct when possible) and evaluates each on the
// validation split. Members are logged as generation 0.
inline Population init_population(const SearchConfig& cfg, const Evaluator& evaluate, Rng& rng,
                                  SearchLog& log) {
  const std::vector<Genotype> init = detail::sample_initial_genotypes(cfg, rng);
  Population population(init.size());
  for (std::size_t i = 0; i < init.size(); ++i) {
    Individual& ind = population[i];
    ind.genotype = init[i];
    ind.birth_index = static_cast<std::int64_t>(i);
    const double secs = detail::evaluate_into(ind, evaluate, detail::candidate_seed(cfg, ind.birth_index));
    detail::record(log, 0, "", "init", ind, secs);
  }
  return population;
}

// One aging-evolution step: tournament parent, one mutation, child trained
// and appended, oldest member evicted. A diverged evaluation scores zero and
// the search continues.
inline Population evolve_step(Population population, const SearchConfig& cfg,
                              const Evaluator& evaluate, Rng& rng, SearchLog& log,
                              int generation, std::int64_t& next_birth) {
  const Individual& parent = sample_parent(population, cfg.tournament_size, rng);
  const std::string parent_str = parent.genotype.str();
  auto [child_geno, kind] = mutate(parent.genotype, rng, cfg.max_genotype_len);

  Individual child;
  child.genotype = std::move(child_geno);
  child.birth_index = next_birth++;
  const double secs = detail::evaluate_into(child, evaluate, detail::candidate_seed(cfg, child.birth_index));

  population.push_back(child);
  const auto oldest = std::min_element(
      population.begin(), population.end(),
      [](const Individual& a, const Individual& b) { return a.birth_index < b.birth_index; });
  population.erase(oldest);
  detail::record(log, generation, parent_str, to_string(kind), child, secs);
  return population;
}

struct SearchResult {
  Individual best;
  std::vector<Individual> top5;
  SearchLog log;
};

namespace detail {

inline SearchResult finalize(const std::vector<Individual>& evaluated, SearchLog log) {
  SearchResult result;
  std::vector<Individual> ranked = evaluated;
  std::sort(ranked.begin(), ranked.end(), [](const Individual& a, const Individual& b) {
    if (a.val_accuracy != b.val_accuracy) return a.val_accuracy > b.val_accuracy;
    return a.birth_index < b.birth_index;
  });
  result.best = ranked.front();
  for (std::size_t i = 0; i < ranked.size() && i < 5; ++i) result.top5.push_back(ranked[i]);
  result.log = std::move(log);
  return result;
}

// Shared-state variant: candidate evaluations run on `workers` threads, the
// population update stays serialized. The log reflects completion order.
inline SearchResult run_search_parallel(const SearchConfig& cfg, const Evaluator& evaluate) {
  Rng rng(derive_seed(cfg.seed, 0));
  SearchLog log;
  std::vector<Individual> evaluated;
  Population population;
  std::mutex mu;
  std::int64_t next_birth = 0;
  int generations_issued = 0;

  {
    const std::vector<Genotype> init = detail::sample_initial_genotypes(cfg, rng);
    Population members(init.size());
    for (std::size_t i = 0; i < init.size(); ++i) {
      members[i].genotype = init[i];
      members[i].birth_index = next_birth++;
    }
    auto eval_range = [&](std::size_t lo, std::size_t hi) {
      for (std::size_t i = lo; i < hi; ++i) {
        const double secs =
            evaluate_into(members[i], evaluate, candidate_seed(cfg, members[i].birth_index));
        std::lock_guard<std::mutex> lock(mu);
        record(log, 0, "", "init", members[i], secs);
      }
    };
    std::vector<std::thread> threads;
    const std::size_t per = (members.size() + cfg.workers - 1) / cfg.workers;
    for (int w = 0; w < cfg.workers; ++w) {
      const std::size_t lo = std::min(members.size(), per * std::size_t(w));
      const std::size_t hi = std::min(members.size(), lo + per);
      if (lo < hi) threads.emplace_back(eval_range, lo, hi);
    }
    for (std::thread& t : threads) t.join();
    population = members;
    evaluated = std::move(members);
  }

  auto worker_loop = [&]() {
    for (;;) {
      Individual child;
      std::string parent_str;
      MutationKind kind;
      int generation;
      {
        std::lock_guard<std::mutex> lock(mu);
        if (generations_issued >= cfg.generations) return;
        generation = ++generations_issued;
        const Individual& parent = sample_parent(population, cfg.tournament_size, rng);
        parent_str = parent.genotype.str();
        auto [mutated, k] = mutate(parent.genotype, rng, cfg.max_genotype_len);
        kind = k;
        child.genotype = std::move(mutated);
        child.birth_index = next_birth++;
      }
      const double secs = evaluate_into(child, evaluate, candidate_seed(cfg, child.birth_index));
      {
        std::lock_guard<std::mutex> lock(mu);
        population.push_back(child);
        const auto oldest = std::min_element(
            population.begin(), population.end(),
            [](const Individual& a, const Individual& b) { return a.birth_index < b.birth_index; });
        population.erase(oldest);
        evaluated.push_back(child);
        record(log, generation, parent_str, to_string(kind), child, secs);
      }
    }
  };
  std::vector<std::thread> threads;
  for (int w = 0; w < cfg.workers; ++w) threads.emplace_back(worker_loop);
  for (std::thread& t : threads) t.join();

  return finalize(evaluated, std::move(log));
}

}  // namespace detail

// Aging evolution: init_population followed by `generations` evolve_steps.
// Returns the best individual over every evaluation (evicted members
// included), the top five, and the full log.
inline SearchResult run_search(const SearchConfig& cfg, const Evaluator& evaluate) {
  if (cfg.population_size < 1) throw std::invalid_argument("run_search: population_size must be >= 1");
  if (cfg.tournament_size < 1 || cfg.tournament_size > cfg.population_size)
    throw std::invalid_argument("run_search: need 1 <= tournament_size <= population_size");
  if (cfg.generations < 0) throw std::invalid_argument("run_search: negative generation count");

  if (cfg.workers > 1) return detail::run_search_parallel(cfg, evaluate);

  Rng rng(derive_seed(cfg.seed, 0));
  SearchLog log;
  Population population = init_population(cfg, evaluate, rng, log);
  std::vector<Individual> evaluated = population;
  std::int64_t next_birth = static_cast<std::int64_t>(population.size());

  for (int gen = 1; gen <= cfg.generations; ++gen) {
    population = evolve_step(std::move(population), cfg, evaluate, rng, log, gen, next_birth);
    evaluated.push_back(population.back());
  }
  return detail::finalize(evaluated, std::move(log));
}

}  // namespace ptsearch
