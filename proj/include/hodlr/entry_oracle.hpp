#pragma once

#include <functional>
#include <memory>
#include <utility>

#include "hodlr/cluster_tree.hpp"
#include "hodlr/types.hpp"

namespace hodlr {

/// Source of matrix entries A(i, j) for an n x n matrix.
///
/// Implementations must be pure and thread-safe: assembly evaluates disjoint
/// blocks concurrently.
template <Scalar T>
class EntryOracle {
 public:
  using value_type = T;
  virtual ~EntryOracle() = default;

  virtual Index size() const = 0;
  virtual T entry(Index i, Index j) const = 0;

  /// Writes A(rows, cols) column-major into `out` with leading dimension ld.
  virtual void fill_block(IndexRange rows, IndexRange cols, T* out, Index ld) const {
    for (Index j = cols.start; j < cols.end; ++j) {
      for (Index i = rows.start; i < rows.end; ++i) {
        out[(i - rows.start) + (j - cols.start) * ld] = entry(i, j);
      }
    }
  }
};

/// Adapts any callable (i, j) -> T.
template <Scalar T>
class FunctionOracle final : public EntryOracle<T> {
 public:
  FunctionOracle(Index n, std::function<T(Index, Index)> f) : n_(n), f_(std::move(f)) {}
  Index size() const override { return n_; }
  T entry(Index i, Index j) const override { return f_(i, j); }

 private:
  Index n_;
  std::function<T(Index, Index)> f_;
};

/// Oracle over an explicit dense matrix (copied).
template <Scalar T>
class DenseOracle final : public EntryOracle<T> {
 public:
  explicit DenseOracle(Matrix<T> a) : a_(std::move(a)) {}
  Index size() const override { return a_.rows(); }
  T entry(Index i, Index j) const override { return a_(i, j); }
  const Matrix<T>& matrix() const { return a_; }

 private:
  Matrix<T> a_;
};

/// Narrows (or widens) a source oracle to another scalar type, e.g. a
/// double-precision kernel evaluated for a single-precision solver.
template <Scalar To, Scalar From>
class CastOracle final : public EntryOracle<To> {
 public:
  explicit CastOracle(std::shared_ptr<const EntryOracle<From>> src) : src_(std::move(src)) {}
  Index size() const override { return src_->size(); }
  To entry(Index i, Index j) const override { return static_cast<To>(src_->entry(i, j)); }

 private:
  std::shared_ptr<const EntryOracle<From>> src_;
};

/// Materializes the whole matrix. Throws std::length_error beyond `max_n`.
template <Scalar T>
Matrix<T> materialize(const EntryOracle<T>& oracle, Index max_n = 8192) {
  const Index n = oracle.size();
  if (n > max_n) throw std::length_error("materialize: n exceeds dense guard");
  Matrix<T> a(n, n);
  oracle.fill_block({0, n}, {0, n}, a.data(), n);
  return a;
}

}  // namespace hodlr
