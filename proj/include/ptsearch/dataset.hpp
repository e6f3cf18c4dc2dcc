#pragma once

#include <cstdint>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptsearch/graph.hpp"
#include "ptsearch/matrix.hpp"
#include "ptsearch/rng.hpp"

namespace ptsearch {

// Data-contract violations; messages carry file (and line where applicable).
struct DatasetError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

struct DatasetMeta {
  int version = 1;
  int num_nodes = 0;
  std::vector<std::string> relations;
  int dim_desc = 0;
  int dim_tweet = 0;
  int dim_numerical = 0;
  int dim_categorical = 0;
};

enum class Split : std::uint8_t { train, val, test, none };

inline const char* to_string(Split s) {
  switch (s) {
    case Split::train: return "train";
    case Split::val: return "val";
    case Split::test: return "test";
    default: return "none";
  }
}

struct SplitAssignment {
  std::vector<Split> tag;

  std::vector<int> rows(Split s) const {
    std::vector<int> out;
    for (std::size_t i = 0; i < tag.size(); ++i)
      if (tag[i] == s) out.push_back(static_cast<int>(i));
    return out;
  }
  std::size_t count(Split s) const {
    std::size_t n = 0;
    for (Split t : tag) n += (t == s);
    return n;
  }
};

// Four per-node feature blocks plus labels (-1 unlabeled, 0 human, 1 bot).
struct FeatureBundle {
  Matrix desc;
  Matrix tweet;
  Matrix numerical;
  Matrix categorical;
  std::vector<int> labels;

  int num_nodes() const { return static_cast<int>(labels.size()); }
};

struct Dataset {
  HeteroGraph graph;
  FeatureBundle features;
  SplitAssignment split;
  DatasetMeta meta;
};

namespace detail {

// %.17g round-trips doubles exactly through text
inline std::string fmt_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof(buf), "%.17g", v);
  return buf;
}

inline std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> fields;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      fields.push_back(cur);
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  fields.push_back(cur);
  return fields;
}

inline double parse_real(const std::string& s, const std::string& file, int line) {
  char* end = nullptr;
  const double v = std::strtod(s.c_str(), &end);
  if (end == s.c_str() || *end != '\0')
    throw DatasetError(file + ":" + std::to_string(line) + ": not a number: '" + s + "'");
  return v;
}

inline long parse_int(const std::string& s, const std::string& file, int line) {
  char* end = nullptr;
  const long v = std::strtol(s.c_str(), &end, 10);
  if (end == s.c_str() || *end != '\0')
    throw DatasetError(file + ":" + std::to_string(line) + ": not an integer: '" + s + "'");
  return v;
}

// Streams one CSV file; the header row is required and consumed up front.
class CsvFile {
 public:
  explicit CsvFile(const std::filesystem::path& path) : name_(path.filename().string()), in_(path) {
    if (!in_) throw DatasetError("missing file: " + path.string());
    std::string header_line;
    if (!std::getline(in_, header_line))
      throw DatasetError(name_ + ":1: missing header row");
    line_no_ = 1;
    header_ = split_line(header_line);
  }

  const std::vector<std::string>& header() const { return header_; }
  const std::string& name() const { return name_; }
  int line() const { return line_no_; }

  bool next(std::vector<std::string>& fields) {
    std::string line;
    while (std::getline(in_, line)) {
      ++line_no_;
      if (line.empty() || line == "\r") continue;
      fields = split_line(line);
      return true;
    }
    return false;
  }

  [[noreturn]] void fail(const std::string& msg) const {
    throw DatasetError(name_ + ":" + std::to_string(line_no_) + ": " + msg);
  }

 private:
  std::string name_;
  std::ifstream in_;
  std::vector<std::string> header_;
  int line_no_ = 0;
};

inline Matrix load_feature_block(const std::filesystem::path& path, int num_nodes, int dim,
                                 const char* block) {
  CsvFile csv(path);
  if (static_cast<int>(csv.header().size()) != dim + 1)
    throw DatasetError(csv.name() + ":1: dimension mismatch vs meta for " + std::string(block) +
                       " (expected " + std::to_string(dim) + " feature columns, got " +
                       std::to_string(csv.header().size() - 1) + ")");
  Matrix out(num_nodes, dim);
  std::vector<std::string> fields;
  int row = 0;
  while (csv.next(fields)) {
    if (static_cast<int>(fields.size()) != dim + 1) csv.fail("wrong field count");
    if (row >= num_nodes) csv.fail("more rows than num_nodes");
    if (parse_int(fields[0], csv.name(), csv.line()) != row)
      csv.fail("rows must appear in node_id order starting at 0");
    for (int c = 0; c < dim; ++c)
      out.at(row, c) = real(parse_real(fields[c + 1], csv.name(), csv.line()));
    ++row;
  }
  if (row != num_nodes)
    throw DatasetError(csv.name() + ": expected " + std::to_string(num_nodes) + " rows, got " +
                       std::to_string(row));
  return out;
}

}  // namespace detail

inline SplitAssignment stratified_split(const std::vector<int>& labels, double train_ratio,
                                        double val_ratio, double test_ratio, std::uint64_t seed) {
  if (std::abs(train_ratio + val_ratio + test_ratio - 1.0) > 1e-9)
    throw std::invalid_argument("stratified_split: ratios must sum to 1");
  SplitAssignment out;
  out.tag.assign(labels.size(), Split::none);
  Rng rng(seed);
  for (int cls : {0, 1}) {
    std::vector<int> idx;
    for (std::size_t i = 0; i < labels.size(); ++i)
      if (labels[i] == cls) idx.push_back(static_cast<int>(i));
    if (idx.size() < 3)
      throw DatasetError("stratified_split: class " + std::to_string(cls) +
                         " has fewer than 3 labeled nodes");
    rng.shuffle(idx);
    const std::size_t n = idx.size();
    std::size_t n_train = static_cast<std::size_t>(std::llround(train_ratio * double(n)));
    std::size_t n_val = static_cast<std::size_t>(std::llround(val_ratio * double(n)));
    if (n_train + n_val > n) n_val = n - n_train;
    for (std::size_t i = 0; i < n; ++i) {
      Split s = i < n_train ? Split::train : (i < n_train + n_val ? Split::val : Split::test);
      out.tag[idx[i]] = s;
    }
  }
  return out;
}

// z-score the numerical block with train-split statistics (population sigma).
// Columns constant on the train rows map to all-zero.
inline FeatureBundle normalize_numerical(const FeatureBundle& bundle, const SplitAssignment& split) {
  const std::vector<int> train_rows = split.rows(Split::train);
  if (train_rows.empty()) throw DatasetError("normalize_numerical: train split is empty");
  FeatureBundle out = bundle;
  Matrix& num = out.numerical;
  for (int c = 0; c < num.cols; ++c) {
    double mean = 0;
    for (int i : train_rows) mean += double(num.at(i, c));
    mean /= double(train_rows.size());
    double var = 0;
    for (int i : train_rows) {
      const double d = double(num.at(i, c)) - mean;
      var += d * d;
    }
    var /= double(train_rows.size());
    const double sigma = std::sqrt(var);
    if (sigma <= 1e-12 * std::max(1.0, std::abs(mean))) {
      for (int i = 0; i < num.rows; ++i) num.at(i, c) = real(0);
    } else {
      for (int i = 0; i < num.rows; ++i)
        num.at(i, c) = real((double(num.at(i, c)) - mean) / sigma);
    }
  }
  return out;
}

struct LoadOptions {
  double train_ratio = 0.7;
  double val_ratio = 0.2;
  double test_ratio = 0.1;
  std::uint64_t split_seed = 17;  // only used when splits.csv is absent
};

inline Dataset load_dataset(const std::filesystem::path& dir, const LoadOptions& opt = {}) {
  namespace fs = std::filesystem;

  // meta.json
  DatasetMeta meta;
  {
    const fs::path path = dir / "meta.json";
    std::ifstream in(path);
    if (!in) throw DatasetError("missing file: " + path.string());
    nlohmann::json j;
    try {
      in >> j;
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(path.string() + ": invalid JSON: " + e.what());
    }
    try {
      meta.version = j.at("version").get<int>();
      meta.num_nodes = j.at("num_nodes").get<int>();
      meta.relations = j.at("relations").get<std::vector<std::string>>();
      const auto& dims = j.at("dims");
      meta.dim_desc = dims.at("desc").get<int>();
      meta.dim_tweet = dims.at("tweet").get<int>();
      meta.dim_numerical = dims.at("numerical").get<int>();
      meta.dim_categorical = dims.at("categorical").get<int>();
    } catch (const nlohmann::json::exception& e) {
      throw DatasetError(path.string() + ": bad schema: " + e.what());
    }
    if (meta.version != 1)
      throw DatasetError(path.string() + ": unsupported format version " +
                         std::to_string(meta.version));
    if (meta.num_nodes < 0 || meta.relations.empty())
      throw DatasetError(path.string() + ": num_nodes must be >= 0 and relations non-empty");
  }
  const int n = meta.num_nodes;

  FeatureBundle features;
  features.desc = detail::load_feature_block(dir / "features_desc.csv", n, meta.dim_desc, "desc");
  features.tweet =
      detail::load_feature_block(dir / "features_tweet.csv", n, meta.dim_tweet, "tweet");
  features.numerical = detail::load_feature_block(dir / "features_numerical.csv", n,
                                                  meta.dim_numerical, "numerical");
  features.categorical = detail::load_feature_block(dir / "features_categorical.csv", n,
                                                    meta.dim_categorical, "categorical");
  for (real v : features.categorical.data)
    if (v != real(0) && v != real(1))
      throw DatasetError("features_categorical.csv: entries must be 0 or 1");

  // labels.csv: nodes may appear at most once; absent nodes stay unlabeled
  features.labels.assign(n, -1);
  {
    detail::CsvFile csv(dir / "labels.csv");
    std::vector<char> seen(n, 0);
    std::vector<std::string> fields;
    while (csv.next(fields)) {
      if (fields.size() != 2) csv.fail("expected node_id,label");
      const long id = detail::parse_int(fields[0], csv.name(), csv.line());
      if (id < 0 || id >= n) csv.fail("node_id out of range");
      if (seen[id]) csv.fail("duplicate node_id");
      seen[id] = 1;
      const long label = detail::parse_int(fields[1], csv.name(), csv.line());
      if (label < -1 || label > 1) csv.fail("label out of range (must be -1, 0 or 1)");
      features.labels[id] = static_cast<int>(label);
    }
  }

  // per-relation edge files
  std::vector<std::vector<std::pair<int, int>>> edges(meta.relations.size());
  for (std::size_t r = 0; r < meta.relations.size(); ++r) {
    detail::CsvFile csv(dir / ("edges_" + meta.relations[r] + ".csv"));
    std::vector<std::string> fields;
    while (csv.next(fields)) {
      if (fields.size() != 2) csv.fail("expected src,dst");
      const long src = detail::parse_int(fields[0], csv.name(), csv.line());
      const long dst = detail::parse_int(fields[1], csv.name(), csv.line());
      if (src < 0 || src >= n || dst < 0 || dst >= n) csv.fail("edge endpoint out of range");
      edges[r].emplace_back(static_cast<int>(src), static_cast<int>(dst));
    }
  }
  HeteroGraph graph = HeteroGraph::build(n, meta.relations, edges);

  // splits.csv if present, otherwise a seeded stratified split
  SplitAssignment split;
  if (fs::exists(dir / "splits.csv")) {
    split.tag.assign(n, Split::none);
    detail::CsvFile csv(dir / "splits.csv");
    std::vector<char> seen(n, 0);
    std::vector<std::string> fields;
    while (csv.next(fields)) {
      if (fields.size() != 2) csv.fail("expected node_id,split");
      const long id = detail::parse_int(fields[0], csv.name(), csv.line());
      if (id < 0 || id >= n) csv.fail("node_id out of range");
      if (seen[id]) csv.fail("duplicate node_id");
      seen[id] = 1;
      if (features.labels[id] < 0) csv.fail("split assigned to unlabeled node");
      if (fields[1] == "train") split.tag[id] = Split::train;
      else if (fields[1] == "val") split.tag[id] = Split::val;
      else if (fields[1] == "test") split.tag[id] = Split::test;
      else csv.fail("unknown split '" + fields[1] + "'");
    }
    for (int i = 0; i < n; ++i)
      if (features.labels[i] >= 0 && split.tag[i] == Split::none)
        throw DatasetError("splits.csv: labeled node " + std::to_string(i) + " has no split");
  } else {
    split = stratified_split(features.labels, opt.train_ratio, opt.val_ratio, opt.test_ratio,
                             opt.split_seed);
  }

  return Dataset{std::move(graph), std::move(features), std::move(split), std::move(meta)};
}

inline void save_dataset(const std::filesystem::path& dir, const HeteroGraph& graph,
                         const FeatureBundle& features, const SplitAssignment* split,
                         const DatasetMeta& meta) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(dir, ec);

  auto open = [&](const std::string& name) {
    std::ofstream out(dir / name);
    if (!out) throw DatasetError("cannot write " + (dir / name).string());
    return out;
  };

  {
    nlohmann::json j;
    j["version"] = meta.version;
    j["num_nodes"] = meta.num_nodes;
    j["relations"] = meta.relations;
    j["dims"] = {{"desc", meta.dim_desc},
                 {"tweet", meta.dim_tweet},
                 {"numerical", meta.dim_numerical},
                 {"categorical", meta.dim_categorical}};
    auto out = open("meta.json");
    out << j.dump(2) << "\n";
  }

  auto write_block = [&](const std::string& name, const Matrix& m) {
    auto out = open(name);
    out << "node_id";
    for (int c = 0; c < m.cols; ++c) out << ",f" << c;
    out << "\n";
    for (int i = 0; i < m.rows; ++i) {
      out << i;
      for (int c = 0; c < m.cols; ++c) out << "," << detail::fmt_real(double(m.at(i, c)));
      out << "\n";
    }
  };
  write_block("features_desc.csv", features.desc);
  write_block("features_tweet.csv", features.tweet);
  write_block("features_numerical.csv", features.numerical);
  write_block("features_categorical.csv", features.categorical);

  for (int r = 0; r < graph.num_relations(); ++r) {
    auto out = open("edges_" + graph.relations()[r] + ".csv");
    out << "src,dst\n";
    for (const auto& [src, dst] : graph.edges(r)) out << src << "," << dst << "\n";
  }

  {
    auto out = open("labels.csv");
    out << "node_id,label\n";
    for (int i = 0; i < features.num_nodes(); ++i)
      out << i << "," << features.labels[i] << "\n";
  }

  if (split) {
    auto out = open("splits.csv");
    out << "node_id,split\n";
    for (int i = 0; i < features.num_nodes(); ++i)
      if (split->tag[i] != Split::none) out << i << "," << to_string(split->tag[i]) << "\n";
  }
}

}  // namespace ptsearch
