#pragma once

#include <filesystem>
#include <fstream>
#include <stdexcept>
#include <string>

#include <json.hpp>

#include "ptsearch/pipeline.hpp"

namespace ptsearch {

// Single-file checkpoint: meta (genotype, hidden dim, dims, seed, wiring
// flags) plus every named parameter matrix. JSON doubles round-trip exactly.
inline void save_model(const std::filesystem::path& path, const PipelineModel& model) {
  nlohmann::json j;
  j["meta"] = {
      {"genotype", model.genotype.str()},
      {"hidden_dim", model.config.hidden_dim},
      {"seed", model.seed},
      {"p_weights", to_string(model.config.p_weights)},
      {"gate_enabled", model.config.gate_enabled},
      {"skip_enabled", model.config.skip_enabled},
      {"leaky_slope", double(model.config.leaky_slope)},
      {"dims",
       {{"num_nodes", model.dims.num_nodes},
        {"relations", model.dims.relations},
        {"desc", model.dims.dim_desc},
        {"tweet", model.dims.dim_tweet},
        {"numerical", model.dims.dim_numerical},
        {"categorical", model.dims.dim_categorical}}},
  };
  nlohmann::json params = nlohmann::json::object();
  for (const std::string& name : model.params.names()) {
    const Matrix& m = model.params.value(name);
    std::vector<double> data(m.data.begin(), m.data.end());
    params[name] = {{"rows", m.rows}, {"cols", m.cols}, {"data", data}};
  }
  j["params"] = std::move(params);

  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path.string());
  out << j.dump() << "\n";
}

inline PipelineModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("missing checkpoint: " + path.string());
  nlohmann::json j;
  in >> j;

  const auto& meta = j.at("meta");
  DatasetMeta dims;
  dims.num_nodes = meta.at("dims").at("num_nodes").get<int>();
  dims.relations = meta.at("dims").at("relations").get<std::vector<std::string>>();
  dims.dim_desc = meta.at("dims").at("desc").get<int>();
  dims.dim_tweet = meta.at("dims").at("tweet").get<int>();
  dims.dim_numerical = meta.at("dims").at("numerical").get<int>();
  dims.dim_categorical = meta.at("dims").at("categorical").get<int>();

  PipelineConfig config;
  config.hidden_dim = meta.at("hidden_dim").get<int>();
  config.p_weights = meta.at("p_weights").get<std::string>() == "relational"
                         ? PWeights::relational
                         : PWeights::identity;
  config.gate_enabled = meta.at("gate_enabled").get<bool>();
  config.skip_enabled = meta.at("skip_enabled").get<bool>();
  config.leaky_slope = real(meta.at("leaky_slope").get<double>());

  PipelineModel model = compile(Genotype::parse(meta.at("genotype").get<std::string>()), dims,
                                config, meta.at("seed").get<std::uint64_t>());

  for (const std::string& name : model.params.names()) {
    const auto& entry = j.at("params").at(name);
    Matrix& m = model.params.value(name);
    if (entry.at("rows").get<int>() != m.rows || entry.at("cols").get<int>() != m.cols)
      throw std::runtime_error("checkpoint parameter shape mismatch for " + name);
    const auto data = entry.at("data").get<std::vector<double>>();
    if (data.size() != m.data.size())
      throw std::runtime_error("checkpoint parameter size mismatch for " + name);
    for (std::size_t i = 0; i < data.size(); ++i) m.data[i] = real(data[i]);
  }
  return model;
}

}  // namespace ptsearch
