#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "hodlr/batched.hpp"
#include "hodlr/hodlr_matrix.hpp"

namespace hodlr {

/// Arrangement of the coupling system of a nonleaf node with children a, b
/// (p = rank U_a, q = rank U_b, T_a = V_a^H Y_a is q x p, T_b = V_b^H Y_b is
/// p x q):
///   pivoted_standard   [[T_a, I_q], [I_p, T_b]]  unknowns (w_a, w_b)
///   permuted_rhs       [[I_p, T_b], [T_a, I_q]]  unknowns (w_a, w_b)
///   permuted_solution  [[I_q, T_a], [T_b, I_p]]  unknowns (w_b, w_a)
/// The permuted forms carry identities on the diagonal and are factored
/// without pivoting.
enum class KVariant { pivoted_standard, permuted_rhs, permuted_solution };

KVariant parse_k_variant(const std::string& s);
std::string to_string(KVariant v);

/// Where the two halves of the right-hand side and of the solution sit in a
/// node's coupling system. The a-half of the right-hand side is V_a^H z_a
/// (q rows); the b-half is V_b^H z_b (p rows).
struct KLayout {
  Index rhs_a = 0;
  Index rhs_b = 0;
  Index sol_a = 0;
  Index sol_b = 0;

  static KLayout of(KVariant v, Index p, Index q);
};

/// Assembles the coupling block. t_a must be q x p and t_b p x q.
template <Scalar T>
Matrix<T> form_k_block(const Matrix<T>& t_a, const Matrix<T>& t_b, KVariant variant);

/// Flop counts per phase, multiply-add convention (2 per fused pair).
struct FactorFlops {
  std::uint64_t leaf_lu = 0;
  std::uint64_t leaf_solve = 0;
  /// Indexed by parent level 0..L-1.
  std::vector<std::uint64_t> t_gemm;
  std::vector<std::uint64_t> w_gemm;
  std::vector<std::uint64_t> y_update;
  std::vector<std::uint64_t> k_lu;
  std::vector<std::uint64_t> w_solve;

  /// W formation plus Y update at one level: the two GEMMs whose cost grows
  /// with the number of coarser panels.
  std::uint64_t gemm_phase(int level) const { return w_gemm.at(level) + y_update.at(level); }
  std::uint64_t total() const;
};

struct FactorOptions {
  KVariant variant = KVariant::pivoted_standard;
  /// Use constant-stride dispatch on levels whose sizes and ranks are uniform.
  bool strided_fast_path = true;
};

/// Per-node health flag raised during factorization (block factored, but a
/// pivot was tiny relative to its column).
struct NearSingularBlock {
  int level;
  Index node;
};

/// In-place factorization: leaf LU factors in d_big, Y overwriting the U
/// panels, V panels unchanged, and one LU-factored coupling block per
/// nonleaf node stored level by level.
template <Scalar T>
class HodlrFactorization {
 public:
  const ClusterTree& tree() const { return h_.tree(); }
  Index size() const { return h_.size(); }
  int levels() const { return h_.levels(); }
  KVariant variant() const { return variant_; }

  /// Holds D's LU factors and Y in place of U.
  const HodlrMatrix<T>& data() const { return h_; }
  const batched::PivotTable& leaf_pivots() const { return leaf_pivots_; }
  const std::vector<T>& k_big(int level) const { return k_big_.at(level); }
  const batched::PivotTable& k_pivots(int level) const { return k_pivots_.at(level); }
  Index k_offset(int level, Index node) const { return k_offsets_.at(level).at(node); }
  Index k_dim(int level, Index node) const;
  /// Rows of the per-level W / w layout (sum of K dimensions at the level).
  Index k_rows(int level) const { return k_rows_.at(level); }
  Index k_row_offset(int level, Index node) const { return k_row_offsets_.at(level).at(node); }
  KLayout k_layout(int level, Index node) const;
  /// LU of one coupling block as a dense matrix (unit-lower L below the diagonal).
  Matrix<T> k_lu(int level, Index node) const;

  const FactorFlops& flops() const { return flops_; }
  const std::vector<NearSingularBlock>& near_singular() const { return near_singular_; }

  /// Scalars held by the factorization: mN + (rank-weighted) Y and V bases
  /// plus the coupling blocks.
  std::uint64_t k_scalars() const;
  /// Peak scalars of the W and T workspaces (allocated once, reused).
  std::uint64_t workspace_scalars() const { return workspace_scalars_; }

 private:
  template <Scalar U>
  friend HodlrFactorization<U> factorize(HodlrMatrix<U>&& h, const FactorOptions& options,
                                         const Executor& exec);

  HodlrMatrix<T> h_;
  KVariant variant_ = KVariant::pivoted_standard;
  batched::PivotTable leaf_pivots_;
  std::vector<std::vector<T>> k_big_;
  std::vector<batched::PivotTable> k_pivots_;
  std::vector<std::vector<Index>> k_offsets_;
  std::vector<std::vector<Index>> k_row_offsets_;
  std::vector<Index> k_rows_;
  FactorFlops flops_;
  std::vector<NearSingularBlock> near_singular_;
  std::uint64_t workspace_scalars_ = 0;
};

/// Consumes h. Throws SingularBlockError naming the level and node of an
/// exactly singular leaf block (level L) or coupling block (its parent level).
template <Scalar T>
HodlrFactorization<T> factorize(HodlrMatrix<T>&& h, const FactorOptions& options = {},
                                const Executor& exec = Executor::serial());

template <Scalar T>
HodlrFactorization<T> factorize(HodlrMatrix<T>&& h, KVariant variant,
                                const Executor& exec = Executor::serial()) {
  FactorOptions o;
  o.variant = variant;
  return factorize(std::move(h), o, exec);
}

template <Scalar T>
const FactorFlops& flop_report(const HodlrFactorization<T>& f) {
  return f.flops();
}

}  // namespace hodlr
