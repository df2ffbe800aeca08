#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "hodlr/factorization.hpp"

namespace hodlr {

struct SolveStats {
  /// Leaf LU solves.
  std::uint64_t leaf_flops = 0;
  /// w = V^H x and x -= Y w, summed over levels.
  std::uint64_t gemm_flops = 0;
  /// Coupling-block solves.
  std::uint64_t k_solve_flops = 0;
  int levels_visited = 0;

  /// Leaf solves plus level GEMMs: 2mN + 4rNL per column for uniform inputs.
  std::uint64_t flops() const { return leaf_flops + gemm_flops; }
  std::uint64_t total_flops() const { return leaf_flops + gemm_flops + k_solve_flops; }
};

/// x = A^{-1} b for every column of b; b is not modified.
template <Scalar T>
Matrix<T> solve(const HodlrFactorization<T>& f, const Matrix<T>& b, SolveStats* stats = nullptr,
                const Executor& exec = Executor::serial());

/// log|det A| and the sign (real field) or unit phase (complex field).
template <Scalar T>
struct LogDet {
  double log_abs;
  T phase;
};

/// Leaf LU determinants (with pivot parity) plus one determinant per coupling
/// block. The nonleaf factor block's determinant equals det(K) times
/// (-1)^(p*q) for pivoted_standard and det(K) for both permuted variants.
/// A zero pivot yields log_abs = -inf and phase 0.
template <Scalar T>
LogDet<T> logdet(const HodlrFactorization<T>& f);

template <Scalar T>
struct RefinementResult {
  Matrix<T> x;
  /// Relative residual after the initial solve and after every correction.
  std::vector<double> history;
  int iterations = 0;
  /// Residual grew on two consecutive corrections.
  bool diverged = false;
};

/// Iterative refinement x <- x + solve(b - A x) with the factorization as
/// preconditioner and `apply` as the operator. Stops after max_iters
/// corrections or once two consecutive corrections fail to improve the
/// residual; returns the best iterate.
template <Scalar T>
RefinementResult<T> solve_with_refinement(const HodlrFactorization<T>& f,
                                          const std::function<Matrix<T>(const Matrix<T>&)>& apply,
                                          const Matrix<T>& b, int max_iters,
                                          const Executor& exec = Executor::serial());

/// Refinement against the unfactored representation.
template <Scalar T>
RefinementResult<T> solve_with_refinement(const HodlrFactorization<T>& f, const HodlrMatrix<T>& h,
                                          const Matrix<T>& b, int max_iters,
                                          const Executor& exec = Executor::serial());

}  // namespace hodlr
