#pragma once

#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace ptsearch {

// A pipeline architecture: a non-empty string over {P, T}. P layers propagate
// neighbor messages, T layers apply per-relation transformations. Layer
// indices are 1-based throughout (0 is the encoder output).
struct Genotype {
  std::string ops;

  static Genotype parse(std::string_view s) {
    if (s.empty()) throw std::invalid_argument("invalid genotype: empty");
    for (char c : s)
      if (c != 'P' && c != 'T')
        throw std::invalid_argument("invalid genotype: character '" + std::string(1, c) +
                                    "' (expected P or T)");
    return Genotype{std::string(s)};
  }

  int length() const { return static_cast<int>(ops.size()); }
  char op(int layer) const { return ops[layer - 1]; }
  const std::string& str() const { return ops; }

  bool operator==(const Genotype& o) const { return ops == o.ops; }
  bool operator!=(const Genotype& o) const { return ops != o.ops; }
};

// 1-based indices of P layers
inline std::vector<int> p_layers(const Genotype& g) {
  std::vector<int> out;
  for (int l = 1; l <= g.length(); ++l)
    if (g.op(l) == 'P') out.push_back(l);
  return out;
}

// 1-based indices of T layers
inline std::vector<int> t_layers(const Genotype& g) {
  std::vector<int> out;
  for (int l = 1; l <= g.length(); ++l)
    if (g.op(l) == 'T') out.push_back(l);
  return out;
}

}  // namespace ptsearch
