#pragma once

#include <vector>

#include "hodlr/entry_oracle.hpp"
#include "hodlr/executor.hpp"
#include "hodlr/factorization.hpp"
#include "hodlr/hodlr_matrix.hpp"
#include "hodlr/solver.hpp"

// Reference computations that share no code path with the batched solver:
// dense Eigen LU, a dense solve of the extended (auxiliary-variable) system,
// and the explicit product form of a factorization.

namespace hodlr::oracle {

inline constexpr Index kDenseGuard = 4096;

/// Partial-pivoted dense LU solve. Throws std::length_error past `guard` and
/// std::runtime_error for a singular matrix.
template <Scalar T>
Matrix<T> dense_solve(const Matrix<T>& a, const Matrix<T>& b, Index guard = kDenseGuard);
template <Scalar T>
Matrix<T> dense_solve(const EntryOracle<T>& a, const Matrix<T>& b, Index guard = kDenseGuard);

template <Scalar T>
LogDet<T> dense_logdet(const Matrix<T>& a);

struct ExtendedLayout {
  /// Row/column where the auxiliary unknown V_k^H x(I_k) of node (level, k)
  /// starts; indexed [level][k], level 0 unused.
  std::vector<std::vector<Index>> aux_offset;
  Index size = 0;
};

/// Builds the extended system
///   D x + sum_levels U_a y_(sibling of a) = b,   V_k^H x(I_k) - y_k = 0
/// with one auxiliary block per non-root node.
template <Scalar T>
Matrix<T> extended_matrix(const HodlrMatrix<T>& h, ExtendedLayout* layout = nullptr,
                          Index guard = kDenseGuard);

template <Scalar T>
struct ExtendedSolution {
  Matrix<T> x;
  /// Full solution vector, x first, auxiliaries after.
  Matrix<T> full;
  ExtendedLayout layout;
};

/// Dense solve of the extended system; x matches solve() on the HODLR form.
template <Scalar T>
ExtendedSolution<T> extended_sparse_solve(const HodlrMatrix<T>& h, const Matrix<T>& b,
                                          Index guard = kDenseGuard);

/// Dense expansion of the factor sequence: leaf blocks (from their LU
/// factors) times one block-diagonal (I, Y V^H; Y V^H, I) factor per level,
/// deepest first.
template <Scalar T>
Matrix<T> product_form_dense(const HodlrFactorization<T>& f, Index guard = kDenseGuard);

/// y = A x evaluated from the entry oracle in row strips, never holding the
/// whole matrix.
template <Scalar T>
Matrix<T> exact_matvec(const EntryOracle<T>& a, const Matrix<T>& x,
                       const Executor& exec = Executor::serial(), Index strip = 256);

/// ||b - A x|| / ||b|| with the exact operator.
template <Scalar T>
double relative_residual(const EntryOracle<T>& a, const Matrix<T>& x, const Matrix<T>& b,
                         const Executor& exec = Executor::serial());

}  // namespace hodlr::oracle
