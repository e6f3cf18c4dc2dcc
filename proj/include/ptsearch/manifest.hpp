#pragma once

#include <chrono>
#include <cstdint>
#include <cstdio>
#include <ctime>
#include <filesystem>
#include <fstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "ptsearch/version.hpp"

namespace ptsearch {

inline std::string iso8601_utc_now() {
  const std::time_t now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof(buf), "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

inline std::uint64_t fnv1a_update(std::uint64_t h, const void* bytes, std::size_t len) {
  const auto* p = static_cast<const unsigned char*>(bytes);
  for (std::size_t i = 0; i < len; ++i) {
    h ^= p[i];
    h *= 0x100000001b3ull;
  }
  return h;
}

// Fingerprint of a dataset directory: FNV-1a over (filename, contents) of the
// format files in sorted name order. A fingerprint, not a security hash.
inline std::string dataset_checksum(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  std::vector<std::string> names;
  if (fs::exists(dir))
    for (const auto& entry : fs::directory_iterator(dir)) {
      const std::string name = entry.path().filename().string();
      if (name == "manifest.json" || !entry.is_regular_file()) continue;
      names.push_back(name);
    }
  std::sort(names.begin(), names.end());
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (const std::string& name : names) {
    h = fnv1a_update(h, name.data(), name.size());
    std::ifstream in(dir / name, std::ios::binary);
    char buf[1 << 14];
    while (in.read(buf, sizeof(buf)) || in.gcount() > 0)
      h = fnv1a_update(h, buf, static_cast<std::size_t>(in.gcount()));
  }
  char out[20];
  std::snprintf(out, sizeof(out), "%016llx", static_cast<unsigned long long>(h));
  return out;
}

// Written before any result file; finalize() rewrites it with the end
// timestamp, checksum, and output list once the run completes.
struct RunManifest {
  std::string command;
  nlohmann::json config;
  std::uint64_t seed = 0;
  std::string dataset_checksum;
  std::string started_at;
  std::string finished_at;
  std::vector<std::string> outputs;

  nlohmann::json to_json() const {
    return nlohmann::json{{"command", command},
                          {"config", config},
                          {"seed", seed},
                          {"version", kVersion},
                          {"precision", kPrecision},
                          {"dataset_checksum", dataset_checksum},
                          {"started_at", started_at},
                          {"finished_at", finished_at},
                          {"outputs", outputs}};
  }

  void write(const std::filesystem::path& path) const {
    std::ofstream out(path);
    if (!out) throw std::runtime_error("cannot write manifest: " + path.string());
    out << to_json().dump(2) << "\n";
  }
};

}  // namespace ptsearch
