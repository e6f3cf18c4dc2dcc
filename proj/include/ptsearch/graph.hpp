#pragma once

#include <cstdint>
#include <span>
#include <stdexcept>
#include <string>
#include <unordered_set>
#include <utility>
#include <vector>

namespace ptsearch {

// Heterogeneous graph: one directed in-neighbor structure per relation.
// Immutable after build(); safe to share across concurrent workers.
class HeteroGraph {
 public:
  // edges_per_relation[r] holds (src, dst) pairs: src lands in dst's in-neighbor list.
  // Parallel edges are kept (the edge multiset is preserved); neighbor lists are sorted.
  static HeteroGraph build(int num_nodes, std::vector<std::string> relations,
                           const std::vector<std::vector<std::pair<int, int>>>& edges_per_relation) {
    if (num_nodes < 0) throw std::invalid_argument("HeteroGraph: negative node count");
    if (relations.empty()) throw std::invalid_argument("HeteroGraph: relation list is empty");
    std::unordered_set<std::string> seen;
    for (const std::string& r : relations)
      if (!seen.insert(r).second)
        throw std::invalid_argument("HeteroGraph: duplicate relation name '" + r + "'");
    if (edges_per_relation.size() != relations.size())
      throw std::invalid_argument("HeteroGraph: edge list count does not match relation count");

    HeteroGraph g;
    g.num_nodes_ = num_nodes;
    g.relations_ = std::move(relations);
    g.adj_.resize(g.relations_.size());
    for (std::size_t r = 0; r < g.relations_.size(); ++r) {
      std::vector<std::vector<int>> in_lists(num_nodes);
      for (const auto& [src, dst] : edges_per_relation[r]) {
        if (src < 0 || src >= num_nodes || dst < 0 || dst >= num_nodes)
          throw std::invalid_argument("HeteroGraph: edge endpoint out of range under relation '" +
                                      g.relations_[r] + "'");
        in_lists[dst].push_back(src);
      }
      Csr& csr = g.adj_[r];
      csr.offsets.resize(num_nodes + 1, 0);
      std::size_t total = 0;
      for (int i = 0; i < num_nodes; ++i) total += in_lists[i].size();
      csr.sources.reserve(total);
      for (int i = 0; i < num_nodes; ++i) {
        std::sort(in_lists[i].begin(), in_lists[i].end());
        csr.offsets[i] = static_cast<std::int64_t>(csr.sources.size());
        csr.sources.insert(csr.sources.end(), in_lists[i].begin(), in_lists[i].end());
      }
      csr.offsets[num_nodes] = static_cast<std::int64_t>(csr.sources.size());
    }
    return g;
  }

  int num_nodes() const { return num_nodes_; }
  int num_relations() const { return static_cast<int>(relations_.size()); }
  const std::vector<std::string>& relations() const { return relations_; }

  int relation_index(const std::string& name) const {
    for (std::size_t r = 0; r < relations_.size(); ++r)
      if (relations_[r] == name) return static_cast<int>(r);
    throw std::invalid_argument("HeteroGraph: unknown relation '" + name + "'");
  }

  // sorted source nodes j with an edge j -> i under relation r
  std::span<const int> in_neighbors(int r, int i) const {
    const Csr& csr = adj_[r];
    return {csr.sources.data() + csr.offsets[i],
            static_cast<std::size_t>(csr.offsets[i + 1] - csr.offsets[i])};
  }

  int in_degree(int r, int i) const {
    return static_cast<int>(adj_[r].offsets[i + 1] - adj_[r].offsets[i]);
  }

  std::int64_t num_edges(int r) const { return adj_[r].offsets[num_nodes_]; }

  std::int64_t total_edges() const {
    std::int64_t n = 0;
    for (int r = 0; r < num_relations(); ++r) n += num_edges(r);
    return n;
  }

  // (src, dst) pairs in (dst, src) sorted order; used by the on-disk writer
  std::vector<std::pair<int, int>> edges(int r) const {
    std::vector<std::pair<int, int>> out;
    out.reserve(static_cast<std::size_t>(num_edges(r)));
    for (int i = 0; i < num_nodes_; ++i)
      for (int j : in_neighbors(r, i)) out.emplace_back(j, i);
    return out;
  }

 private:
  struct Csr {
    std::vector<std::int64_t> offsets;
    std::vector<int> sources;
  };

  int num_nodes_ = 0;
  std::vector<std::string> relations_;
  std::vector<Csr> adj_;
};

}  // namespace ptsearch
