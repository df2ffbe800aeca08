#pragma once

#include <limits>

#include "hodlr/entry_oracle.hpp"

namespace hodlr {

enum class CompressionMethod {
  aca_partial_pivot,
  aca_rook_pivot,
  dense_svd,
};

CompressionMethod parse_compression_method(const std::string& s);
std::string to_string(CompressionMethod m);

struct CompressionConfig {
  /// Relative Frobenius tolerance.
  double tol = 1e-12;
  /// Rank cap; negative means uncapped.
  Index max_rank = -1;
  CompressionMethod method = CompressionMethod::aca_rook_pivot;

  Index rank_cap(Index rows, Index cols) const {
    const Index full = std::min(rows, cols);
    return max_rank < 0 ? full : std::min(full, max_rank);
  }
};

/// block ~= u * v^H. Both factors have `rank()` columns; v holds unconjugated
/// columns.
template <Scalar T>
struct LowRankFactor {
  Matrix<T> u;
  Matrix<T> v;
  /// Set when the rank cap stopped compression before the tolerance was met.
  bool truncated = false;

  Index rank() const { return u.cols(); }
  Index rows() const { return u.rows(); }
  Index cols() const { return v.rows(); }
  Matrix<T> dense() const { return u * v.adjoint(); }
};

/// Low-rank approximation of A(rows, cols).
///
/// ACA methods build the factor from sampled residual rows and columns and
/// stop once the newest cross term's Frobenius norm is at most tol times the
/// running Frobenius estimate of the block. dense_svd materializes the block
/// and keeps singular values sigma_k > tol * sigma_1.
///
/// Throws NonFiniteEntryError when the oracle yields NaN or Inf.
template <Scalar T>
LowRankFactor<T> compress(const EntryOracle<T>& oracle, IndexRange rows, IndexRange cols,
                          const CompressionConfig& config);

/// Compresses an explicit dense block.
template <Scalar T>
LowRankFactor<T> compress_dense(const Matrix<T>& block, const CompressionConfig& config);

/// Rank reduction of an existing factor by QR of both sides and an SVD of the
/// small core. Singular values <= tol * sigma_1 are dropped.
template <Scalar T>
LowRankFactor<T> recompress(const LowRankFactor<T>& factor, double tol);

}  // namespace hodlr
