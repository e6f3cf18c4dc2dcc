// ptsearch: generate / search / train / ablate pipelines for relational-graph
// bot detection. Consumers are scripts and CI; exit codes are a contract:
// 0 success, 2 usage or config error, 3 data error, 4 runtime failure.

#include <CLI11.hpp>
#include <json.hpp>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <string>
#include <vector>

#include "ptsearch/checkpoint.hpp"
#include "ptsearch/dataset.hpp"
#include "ptsearch/evolution.hpp"
#include "ptsearch/experiment.hpp"
#include "ptsearch/manifest.hpp"
#include "ptsearch/synthetic.hpp"
#include "ptsearch/trainer.hpp"
#include "ptsearch/version.hpp"

namespace fs = std::filesystem;
using nlohmann::json;
using namespace ptsearch;

namespace {

struct ModelFlags {
  int hidden = 32;
  bool no_gate = false;
  bool no_skip = false;
  std::string p_weights = "identity";
  double weight_decay = 2e-4;
  double dropout_feature = 0.5;
  double dropout_gnn = 0.8;

  PipelineConfig pipeline_config() const {
    PipelineConfig cfg;
    cfg.hidden_dim = hidden;
    cfg.gate_enabled = !no_gate;
    cfg.skip_enabled = !no_skip;
    cfg.p_weights = p_weights == "relational" ? PWeights::relational : PWeights::identity;
    cfg.dropout_feature = real(dropout_feature);
    cfg.dropout_gnn = real(dropout_gnn);
    return cfg;
  }

  json to_json() const {
    return json{{"hidden", hidden},           {"gate_enabled", !no_gate},
                {"skip_enabled", !no_skip},   {"p_weights", p_weights},
                {"weight_decay", weight_decay}, {"dropout_feature", dropout_feature},
                {"dropout_gnn", dropout_gnn}};
  }
};

void add_model_flags(CLI::App* cmd, ModelFlags& flags) {
  cmd->add_option("--hidden", flags.hidden, "Hidden dimension D (divisible by 4)")
      ->capture_default_str();
  cmd->add_flag("--no-gate", flags.no_gate, "Disable the gate on propagation outputs");
  cmd->add_flag("--no-skip", flags.no_skip, "Disable skip-connections on transformations");
  cmd->add_option("--p-weights", flags.p_weights, "Propagation weights: identity | relational")
      ->check(CLI::IsMember({"identity", "relational"}))
      ->capture_default_str();
  cmd->add_option("--weight-decay", flags.weight_decay, "L2 regularization factor")
      ->capture_default_str();
  cmd->add_option("--dropout-feature", flags.dropout_feature, "Dropout on the encoder output")
      ->capture_default_str();
  cmd->add_option("--dropout-gnn", flags.dropout_gnn, "Dropout after each transformation")
      ->capture_default_str();
}

RunManifest start_manifest(const std::string& command, json config, std::uint64_t seed,
                           const fs::path& out_dir) {
  fs::create_directories(out_dir);
  RunManifest m;
  m.command = command;
  m.config = std::move(config);
  m.seed = seed;
  m.started_at = iso8601_utc_now();
  m.write(out_dir / "manifest.json");
  return m;
}

void finish_manifest(RunManifest& m, const fs::path& out_dir, const std::string& checksum,
                     std::vector<std::string> outputs) {
  m.finished_at = iso8601_utc_now();
  m.dataset_checksum = checksum;
  m.outputs = std::move(outputs);
  m.write(out_dir / "manifest.json");
}

Dataset load_normalized(const fs::path& data_dir) {
  Dataset data = load_dataset(data_dir);
  data.features = normalize_numerical(data.features, data.split);
  return data;
}

void write_text(const fs::path& path, const std::string& content) {
  fs::create_directories(path.parent_path());
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write " + path.string());
  out << content;
}

json individual_to_json(const Individual& ind) {
  return json{{"genotype", ind.genotype.str()},
              {"val_acc", ind.val_accuracy},
              {"test_acc", ind.test_accuracy},
              {"birth_index", ind.birth_index},
              {"diverged", ind.diverged}};
}

int run_generate(const SyntheticConfig& cfg, const fs::path& out_dir) {
  json config{{"nodes", cfg.num_nodes},       {"bot_fraction", cfg.bot_fraction},
              {"relations", cfg.relation_count}, {"separation", cfg.separation},
              {"dim_text", cfg.dim_text},     {"dim_numerical", cfg.dim_numerical},
              {"dim_categorical", cfg.dim_categorical}};
  RunManifest manifest = start_manifest("generate", config, cfg.seed, out_dir);
  generate_synthetic(cfg, out_dir);
  std::vector<std::string> outputs;
  for (const auto& entry : fs::directory_iterator(out_dir)) {
    const std::string name = entry.path().filename().string();
    if (name != "manifest.json") outputs.push_back(name);
  }
  std::sort(outputs.begin(), outputs.end());
  finish_manifest(manifest, out_dir, dataset_checksum(out_dir), outputs);
  std::cout << "dataset written to " << out_dir.string() << "\n";
  return 0;
}

int run_search_cmd(const fs::path& data_dir, const fs::path& out_dir, SearchConfig scfg,
                   const ModelFlags& flags, int epochs, double lr) {
  json config{{"data", data_dir.string()},
              {"k", scfg.population_size},
              {"m", scfg.tournament_size},
              {"generations", scfg.generations},
              {"epochs", epochs},
              {"lr", lr},
              {"max_len", scfg.max_genotype_len},
              {"workers", scfg.workers}};
  const json flag_json = flags.to_json();
  for (const auto& [key, value] : flag_json.items()) config[key] = value;
  RunManifest manifest = start_manifest("search", config, scfg.seed, out_dir);

  const Dataset data = load_normalized(data_dir);
  const PipelineConfig pcfg = flags.pipeline_config();

  Evaluator evaluator = [&](const Genotype& genotype, std::uint64_t seed) {
    TrainConfig tcfg;
    tcfg.epochs = epochs;
    tcfg.lr = lr;
    tcfg.weight_decay = flags.weight_decay;
    tcfg.seed = seed;
    try {
      const TrainResult result = train_model(genotype, data, pcfg, tcfg);
      return EvalOutcome{result.val_accuracy, result.test_accuracy, false};
    } catch (const DivergedError&) {
      return EvalOutcome{0, 0, true};
    }
  };

  const SearchResult result = run_search(scfg, evaluator);

  bool any_ok = false;
  for (const SearchRecord& r : result.log.records) any_ok |= !r.diverged;
  if (!any_ok) throw std::runtime_error("every candidate diverged during the search");

  std::string log_text;
  for (const SearchRecord& r : result.log.records) {
    json line{{"gen", r.generation},   {"parent", r.parent},    {"mutation", r.mutation},
              {"child", r.child},      {"val_acc", r.val_acc},  {"test_acc", r.test_acc},
              {"diverged", r.diverged}, {"seconds", r.seconds}};
    log_text += line.dump() + "\n";
  }
  write_text(out_dir / "searchlog.ndjson", log_text);

  json top5 = json::array();
  for (const Individual& ind : result.top5) top5.push_back(individual_to_json(ind));
  const json summary{{"best", individual_to_json(result.best)}, {"top5", top5}};
  write_text(out_dir / "top5.json", summary.dump(2) + "\n");

  finish_manifest(manifest, out_dir, dataset_checksum(data_dir),
                  {"searchlog.ndjson", "top5.json"});
  std::cout << "best_genotype=" << result.best.genotype.str()
            << " val_acc=" << result.best.val_accuracy
            << " test_acc=" << result.best.test_accuracy << "\n";
  return 0;
}

int run_train_cmd(const fs::path& data_dir, const fs::path& out_dir, const std::string& genotype_str,
                  const ModelFlags& flags, int epochs, double lr, int runs, std::uint64_t seed) {
  const Genotype genotype = Genotype::parse(genotype_str);
  json config{{"data", data_dir.string()}, {"genotype", genotype_str}, {"epochs", epochs},
              {"lr", lr},                  {"runs", runs}};
  const json flag_json = flags.to_json();
  for (const auto& [key, value] : flag_json.items()) config[key] = value;
  RunManifest manifest = start_manifest("train", config, seed, out_dir);

  const Dataset data = load_normalized(data_dir);
  TrainConfig tcfg;
  tcfg.epochs = epochs;
  tcfg.lr = lr;
  tcfg.weight_decay = flags.weight_decay;
  tcfg.seed = seed;

  const RepeatedRunResult result = run_repeated(genotype.str(), genotype, data,
                                                flags.pipeline_config(), tcfg, runs, {}, true);
  if (result.report.runs_completed == 0)
    throw std::runtime_error("every training run diverged");

  const json metrics{{"genotype", genotype.str()},
                     {"runs", runs},
                     {"report", report_to_json(result.report)}};
  write_text(out_dir / "metrics.json", metrics.dump(2) + "\n");
  write_text(out_dir / "tables" / "train.txt", format_table({result.report}));
  std::vector<std::string> outputs = {"metrics.json", "tables/train.txt"};
  if (result.first_model) {
    save_model(out_dir / "model.json", *result.first_model);
    outputs.push_back("model.json");
  }

  finish_manifest(manifest, out_dir, dataset_checksum(data_dir), std::move(outputs));
  std::cout << "accuracy=" << result.report.metrics[0].mean << " ± "
            << result.report.metrics[0].stddev << " over " << result.report.runs_completed
            << " runs\n";
  return 0;
}

int run_ablate_cmd(const fs::path& data_dir, const fs::path& out_dir,
                   const std::string& genotype_str, const std::string& mode_str,
                   const ModelFlags& flags, int epochs, double lr, int runs, std::uint64_t seed) {
  const Genotype genotype = Genotype::parse(genotype_str);
  const AblationMode mode = mode_str == "features" ? AblationMode::features
                            : mode_str == "gate"   ? AblationMode::gate
                                                   : AblationMode::skip;
  json config{{"data", data_dir.string()}, {"genotype", genotype_str}, {"mode", mode_str},
              {"epochs", epochs},          {"lr", lr},                 {"runs", runs}};
  const json flag_json = flags.to_json();
  for (const auto& [key, value] : flag_json.items()) config[key] = value;
  RunManifest manifest = start_manifest("ablate", config, seed, out_dir);

  const Dataset data = load_normalized(data_dir);
  TrainConfig tcfg;
  tcfg.epochs = epochs;
  tcfg.lr = lr;
  tcfg.weight_decay = flags.weight_decay;
  tcfg.seed = seed;

  const auto rows = run_ablation(mode, genotype, data, flags.pipeline_config(), tcfg, runs);

  json rows_json = json::array();
  for (const AggregateReport& row : rows) rows_json.push_back(report_to_json(row));
  const json out{{"genotype", genotype.str()}, {"mode", mode_str}, {"rows", rows_json}};
  write_text(out_dir / ("ablation_" + mode_str + ".json"), out.dump(2) + "\n");
  write_text(out_dir / "tables" / ("ablation_" + mode_str + ".txt"), format_table(rows));

  finish_manifest(manifest, out_dir, dataset_checksum(data_dir),
                  {"ablation_" + mode_str + ".json", "tables/ablation_" + mode_str + ".txt"});
  std::cout << format_table(rows);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"P/T pipeline architecture search for relational-graph bot detection"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(kVersion));

  // generate
  auto* generate = app.add_subcommand("generate", "Write a synthetic bot-graph dataset");
  SyntheticConfig gen_cfg;
  std::string gen_out;
  generate->add_option("--nodes", gen_cfg.num_nodes, "Node count")->capture_default_str();
  generate->add_option("--bot-fraction", gen_cfg.bot_fraction, "Fraction of bot nodes")
      ->capture_default_str();
  generate->add_option("--relations", gen_cfg.relation_count, "Relation count")
      ->capture_default_str();
  generate->add_option("--separation", gen_cfg.separation, "Class separation strength")
      ->capture_default_str();
  generate->add_option("--dim-text", gen_cfg.dim_text, "Text embedding width")
      ->capture_default_str();
  generate->add_option("--seed", gen_cfg.seed, "Seed")->envname("PTSEARCH_SEED")
      ->capture_default_str();
  generate->add_option("--out", gen_out, "Output dataset directory")->required();

  // search
  auto* search = app.add_subcommand("search", "Evolve P/T pipelines on a dataset");
  std::string search_data, search_out;
  SearchConfig scfg;
  ModelFlags search_flags;
  int search_epochs = 70;
  double search_lr = 0.04;
  search->add_option("--data", search_data, "Dataset directory")->required();
  search->add_option("--out", search_out, "Output directory")->required();
  search->add_option("--k", scfg.population_size, "Population size")->capture_default_str();
  search->add_option("--m", scfg.tournament_size, "Tournament sample size")->capture_default_str();
  search->add_option("--generations", scfg.generations, "Generations")->capture_default_str();
  search->add_option("--epochs", search_epochs, "Training epochs per candidate")
      ->capture_default_str();
  search->add_option("--lr", search_lr, "Learning rate during search")->capture_default_str();
  search->add_option("--max-len", scfg.max_genotype_len, "Genotype length cap")
      ->capture_default_str();
  search->add_option("--workers", scfg.workers, "Parallel evaluation workers")
      ->capture_default_str();
  search->add_option("--seed", scfg.seed, "Seed")->envname("PTSEARCH_SEED")->capture_default_str();
  add_model_flags(search, search_flags);

  // train
  auto* train = app.add_subcommand("train", "Train one genotype with repeated seeds");
  std::string train_data, train_out, train_genotype;
  ModelFlags train_flags;
  int train_epochs = 100, train_runs = 5;
  double train_lr = 1e-3;
  std::uint64_t train_seed = 1;
  train->add_option("--data", train_data, "Dataset directory")->required();
  train->add_option("--out", train_out, "Output directory")->required();
  train->add_option("--genotype", train_genotype, "P/T string, e.g. PPTPT")->required();
  train->add_option("--epochs", train_epochs, "Training epochs")->capture_default_str();
  train->add_option("--lr", train_lr, "Learning rate")->capture_default_str();
  train->add_option("--runs", train_runs, "Seeds to aggregate")->capture_default_str();
  train->add_option("--seed", train_seed, "Base seed")->envname("PTSEARCH_SEED")
      ->capture_default_str();
  add_model_flags(train, train_flags);

  // ablate
  auto* ablate = app.add_subcommand("ablate", "Ablation grids for a fixed genotype");
  std::string ab_data, ab_out, ab_genotype, ab_mode;
  ModelFlags ab_flags;
  int ab_epochs = 100, ab_runs = 5;
  double ab_lr = 1e-3;
  std::uint64_t ab_seed = 1;
  ablate->add_option("--data", ab_data, "Dataset directory")->required();
  ablate->add_option("--out", ab_out, "Output directory")->required();
  ablate->add_option("--genotype", ab_genotype, "P/T string")->required();
  ablate->add_option("--mode", ab_mode, "features | gate | skip")
      ->required()
      ->check(CLI::IsMember({"features", "gate", "skip"}));
  ablate->add_option("--epochs", ab_epochs, "Training epochs")->capture_default_str();
  ablate->add_option("--lr", ab_lr, "Learning rate")->capture_default_str();
  ablate->add_option("--runs", ab_runs, "Seeds per arm")->capture_default_str();
  ablate->add_option("--seed", ab_seed, "Base seed")->envname("PTSEARCH_SEED")
      ->capture_default_str();
  add_model_flags(ablate, ab_flags);

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForVersion& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return 2;
  }

  try {
    if (app.got_subcommand(generate)) return run_generate(gen_cfg, gen_out);
    if (app.got_subcommand(search))
      return run_search_cmd(search_data, search_out, scfg, search_flags, search_epochs, search_lr);
    if (app.got_subcommand(train))
      return run_train_cmd(train_data, train_out, train_genotype, train_flags, train_epochs,
                           train_lr, train_runs, train_seed);
    if (app.got_subcommand(ablate))
      return run_ablate_cmd(ab_data, ab_out, ab_genotype, ab_mode, ab_flags, ab_epochs, ab_lr,
                            ab_runs, ab_seed);
  } catch (const DatasetError& e) {
    std::cerr << "data error: " << e.what() << "\n";
    return 3;
  } catch (const std::invalid_argument& e) {
    std::cerr << "config error: " << e.what() << "\n";
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 4;
  }
  return 0;
}
