#pragma once

#include <span>
#include <utility>
#include <vector>

#include "hodlr/types.hpp"

namespace hodlr {

/// Half-open index interval [start, end).
struct IndexRange {
  Index start = 0;
  Index end = 0;

  Index size() const { return end - start; }
  bool contains(const IndexRange& other) const {
    return start <= other.start && other.end <= end;
  }
  friend bool operator==(const IndexRange&, const IndexRange&) = default;
};

/// Perfect binary tree of consecutive index ranges over [0, n).
///
/// Level l holds 2^l nodes in left-to-right order; node k at level l has
/// children 2k and 2k+1 at level l+1. Every split gives the left child
/// ceil(len/2) indices. Immutable after construction.
class ClusterTree {
 public:
  /// Depth is the smallest L with leaf_size * 2^L >= n, clamped so that no
  /// leaf is empty (2^L <= n).
  static ClusterTree build(Index n, Index leaf_size);

  /// Tree with exactly `levels` levels below the root. Requires 2^levels <= n.
  static ClusterTree with_levels(Index n, int levels);

  Index size() const { return n_; }
  /// Index of the leaf level, L. The tree has L+1 levels 0..L.
  int levels() const { return static_cast<int>(nodes_.size()) - 1; }
  Index node_count(int level) const { return Index{1} << level; }
  Index leaf_count() const { return node_count(levels()); }

  const IndexRange& node(int level, Index k) const { return nodes_.at(level).at(k); }
  std::span<const IndexRange> level_nodes(int level) const { return nodes_.at(level); }
  std::span<const IndexRange> leaves() const { return nodes_.back(); }

  /// The 2^(level-1) sibling pairs at `level`, one per parent, in parent order.
  /// Throws std::out_of_range unless 1 <= level <= L.
  std::vector<std::pair<IndexRange, IndexRange>> sibling_pairs(int level) const;

  /// Ancestor of node k at `level` when viewed from `ancestor_level` <= level.
  static Index ancestor(Index k, int level, int ancestor_level) {
    return k >> (level - ancestor_level);
  }

  /// Largest leaf length.
  Index max_leaf_size() const;
  /// True when all leaves have the same length.
  bool uniform_leaves() const;

  friend bool operator==(const ClusterTree&, const ClusterTree&) = default;

 private:
  ClusterTree(Index n, int levels);

  Index n_ = 0;
  std::vector<std::vector<IndexRange>> nodes_;
};

}  // namespace hodlr
