#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "hodlr/cluster_tree.hpp"
#include "hodlr/compression.hpp"
#include "hodlr/entry_oracle.hpp"
#include "hodlr/executor.hpp"

namespace hodlr {

/// All bases of one tree level in a single column-major buffer of height n.
///
/// Node k occupies rows I_k and columns [col_offsets[k], col_offsets[k] +
/// node_ranks[k]). Bases are left-aligned, so every offset is 0 and the
/// buffer is as wide as the largest rank on the level.
template <Scalar T>
struct LevelPanel {
  int level = 0;
  std::vector<Index> node_ranks;
  std::vector<Index> col_offsets;
  Index rows = 0;
  Index width = 0;
  std::vector<T> data;

  Index ld() const { return rows; }
  bool uniform() const;
};

/// Scalar counts of a HODLR representation. "Basis" counts cover only the
/// n_k x rank_k blocks in use; "allocated" includes the padding that ragged
/// ranks leave in the panels.
struct StorageReport {
  std::uint64_t diagonal_scalars = 0;
  std::uint64_t u_basis_scalars = 0;
  std::uint64_t v_basis_scalars = 0;
  std::uint64_t basis_scalars = 0;
  std::uint64_t allocated_scalars = 0;
  std::uint64_t scalar_bytes = 0;
  std::uint64_t bytes_diagonal = 0;
  std::uint64_t bytes_bases = 0;
  std::uint64_t bytes_total = 0;
  /// m*N + 2*r*N*L and m*N + r*N*L; set only for uniform leaf size and rank.
  std::optional<std::uint64_t> predicted_representation;
  std::optional<std::uint64_t> predicted_factorization;
};

/// A(I_a, I_b) = U_a V_b^H for every sibling pair (a, b), plus dense leaf
/// blocks. U panels hold the left bases; the V panel block of node k holds the
/// right basis paired with U of k's sibling, so it has rank(sibling) columns.
template <Scalar T>
class HodlrMatrix {
 public:
  HodlrMatrix() = default;
  /// Zero-filled matrix. u_ranks[l][k] is the rank of U for node k at level l;
  /// u_ranks[0] is ignored and may be empty.
  HodlrMatrix(ClusterTree tree, const std::vector<std::vector<Index>>& u_ranks);

  const ClusterTree& tree() const { return tree_; }
  Index size() const { return tree_.size(); }
  int levels() const { return tree_.levels(); }
  static constexpr Field field() { return field_of<T>(); }

  Index u_rank(int level, Index k) const { return u_panels_.at(level - 1).node_ranks.at(k); }
  Index v_rank(int level, Index k) const { return u_rank(level, k ^ 1); }
  std::vector<Index> level_ranks(int level) const { return u_panels_.at(level - 1).node_ranks; }
  Index max_rank(int level) const { return u_panels_.at(level - 1).width; }

  MatrixMap<T> diagonal(Index leaf);
  ConstMatrixMap<T> diagonal(Index leaf) const;
  MatrixMap<T> u(int level, Index k);
  ConstMatrixMap<T> u(int level, Index k) const;
  MatrixMap<T> v(int level, Index k);
  ConstMatrixMap<T> v(int level, Index k) const;

  /// Leaf blocks stored back to back in leaf order, each column-major.
  std::vector<T>& d_big() { return d_big_; }
  const std::vector<T>& d_big() const { return d_big_; }
  Index leaf_offset(Index leaf) const { return leaf_offsets_.at(leaf); }
  LevelPanel<T>& u_panel(int level) { return u_panels_.at(level - 1); }
  const LevelPanel<T>& u_panel(int level) const { return u_panels_.at(level - 1); }
  LevelPanel<T>& v_panel(int level) { return v_panels_.at(level - 1); }
  const LevelPanel<T>& v_panel(int level) const { return v_panels_.at(level - 1); }

  /// True if any off-diagonal block hit the rank cap before its tolerance.
  bool truncated() const { return truncated_; }
  void set_truncated(bool t) { truncated_ = t; }

 private:
  ClusterTree tree_ = ClusterTree::build(1, 1);
  std::vector<Index> leaf_offsets_;
  std::vector<T> d_big_;
  std::vector<LevelPanel<T>> u_panels_;
  std::vector<LevelPanel<T>> v_panels_;
  bool truncated_ = false;
};

/// Dense leaf blocks plus a compressed factor pair for every sibling pair.
/// Blocks are compressed in parallel on `exec`.
template <Scalar T>
HodlrMatrix<T> assemble(const EntryOracle<T>& oracle, const ClusterTree& tree,
                        const CompressionConfig& config, const Executor& exec = Executor::serial());

/// Throws std::length_error when n > max_n.
template <Scalar T>
Matrix<T> reconstruct_dense(const HodlrMatrix<T>& h, Index max_n = 4096);

/// y = A x for one or several columns.
template <Scalar T>
Matrix<T> matvec(const HodlrMatrix<T>& h, const Matrix<T>& x);

template <Scalar T>
StorageReport storage_report(const HodlrMatrix<T>& h);

/// Binary dump; layout in README.md, "Binary format".
template <Scalar T>
void write_binary(const HodlrMatrix<T>& h, std::ostream& out);
template <Scalar T>
HodlrMatrix<T> read_binary(std::istream& in);
/// Field tag of a dump without reading the rest.
Field peek_binary_field(std::istream& in);

}  // namespace hodlr
