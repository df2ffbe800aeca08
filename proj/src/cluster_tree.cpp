#include "hodlr/cluster_tree.hpp"

#include <algorithm>
#include <stdexcept>
#include <string>

namespace hodlr {

std::string to_string(Field f) {
  switch (f) {
    case Field::real32: return "real32";
    case Field::real64: return "real64";
    case Field::complex64: return "complex64";
    case Field::complex128: return "complex128";
  }
  return "unknown";
}

ClusterTree::ClusterTree(Index n, int levels) : n_(n), nodes_(levels + 1) {
  nodes_[0].push_back({0, n});
  for (int l = 1; l <= levels; ++l) {
    auto& out = nodes_[l];
    out.reserve(std::size_t{1} << l);
    for (const auto& parent : nodes_[l - 1]) {
      const Index mid = parent.start + (parent.size() + 1) / 2;
      out.push_back({parent.start, mid});
      out.push_back({mid, parent.end});
    }
  }
}

ClusterTree ClusterTree::build(Index n, Index leaf_size) {
  if (n < 1) throw std::invalid_argument("ClusterTree::build: n must be >= 1");
  if (leaf_size < 1) throw std::invalid_argument("ClusterTree::build: leaf_size must be >= 1");
  int levels = 0;
  while ((leaf_size << levels) < n) ++levels;
  while ((Index{1} << levels) > n) --levels;
  return ClusterTree(n, levels);
}

ClusterTree ClusterTree::with_levels(Index n, int levels) {
  if (n < 1) throw std::invalid_argument("ClusterTree::with_levels: n must be >= 1");
  if (levels < 0 || levels > 62 || (Index{1} << levels) > n) {
    throw std::invalid_argument("ClusterTree::with_levels: need 0 <= L and 2^L <= n (n=" +
                                std::to_string(n) + ", L=" + std::to_string(levels) + ")");
  }
  return ClusterTree(n, levels);
}

std::vector<std::pair<IndexRange, IndexRange>> ClusterTree::sibling_pairs(int level) const {
  if (level < 1 || level > levels()) {
    throw std::out_of_range("ClusterTree::sibling_pairs: level " + std::to_string(level) +
                            " out of range [1, " + std::to_string(levels()) + "]");
  }
  const auto& nodes = nodes_[level];
  std::vector<std::pair<IndexRange, IndexRange>> pairs;
  pairs.reserve(nodes.size() / 2);
  for (std::size_t k = 0; k < nodes.size(); k += 2) pairs.emplace_back(nodes[k], nodes[k + 1]);
  return pairs;
}

Index ClusterTree::max_leaf_size() const {
  Index m = 0;
  for (const auto& leaf : leaves()) m = std::max(m, leaf.size());
  return m;
}

bool ClusterTree::uniform_leaves() const {
  const auto l = leaves();
  return std::all_of(l.begin(), l.end(), [&](const IndexRange& r) { return r.size() == l[0].size(); });
}

}  // namespace hodlr
