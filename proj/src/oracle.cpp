#include "hodlr/oracle.hpp"

#include <Eigen/LU>
#include <cmath>
#include <limits>
#include <stdexcept>

namespace hodlr::oracle {

namespace {

void guard_size(Index n, Index guard, const char* what) {
  if (n > guard) {
    throw std::length_error(std::string(what) + ": n = " + std::to_string(n) +
                            " exceeds dense guard " + std::to_string(guard));
  }
}

template <Scalar T>
void require_nonsingular(const Eigen::PartialPivLU<Matrix<T>>& lu, const char* what) {
  const auto& m = lu.matrixLU();
  for (Index k = 0; k < m.rows(); ++k) {
    if (m(k, k) == T(0)) throw std::runtime_error(std::string(what) + ": matrix is singular");
  }
}

/// Inverts getrf-style row swaps on a dense LU product.
template <Scalar T>
Matrix<T> lu_product(const T* lu, Index d, std::span<const Index> piv) {
  Eigen::Map<const Matrix<T>> m(lu, d, d);
  Matrix<T> lower = m.template triangularView<Eigen::UnitLower>();
  Matrix<T> upper = m.template triangularView<Eigen::Upper>();
  Matrix<T> a = lower * upper;
  for (Index k = d - 1; k >= 0; --k) {
    if (piv[k] != k) a.row(k).swap(a.row(piv[k]));
  }
  return a;
}

}  // namespace

template <Scalar T>
Matrix<T> dense_solve(const Matrix<T>& a, const Matrix<T>& b, Index guard) {
  guard_size(a.rows(), guard, "dense_solve");
  if (a.rows() != a.cols() || b.rows() != a.rows()) {
    throw std::invalid_argument("dense_solve: shape mismatch");
  }
  Eigen::PartialPivLU<Matrix<T>> lu(a);
  require_nonsingular<T>(lu, "dense_solve");
  return lu.solve(b);
}

template <Scalar T>
Matrix<T> dense_solve(const EntryOracle<T>& a, const Matrix<T>& b, Index guard) {
  guard_size(a.size(), guard, "dense_solve");
  return dense_solve<T>(materialize(a, guard), b, guard);
}

template <Scalar T>
LogDet<T> dense_logdet(const Matrix<T>& a) {
  Eigen::PartialPivLU<Matrix<T>> lu(a);
  const auto& m = lu.matrixLU();
  double log_abs = 0;
  T phase = static_cast<T>(lu.permutationP().determinant());
  for (Index k = 0; k < m.rows(); ++k) {
    const real_t<T> s = std::abs(m(k, k));
    if (s == 0) return {-std::numeric_limits<double>::infinity(), T(0)};
    log_abs += std::log(static_cast<double>(s));
    phase *= m(k, k) / s;
  }
  if constexpr (is_complex_v<T>) phase /= std::abs(phase);
  return {log_abs, phase};
}

template <Scalar T>
Matrix<T> extended_matrix(const HodlrMatrix<T>& h, ExtendedLayout* layout, Index guard) {
  const ClusterTree& tree = h.tree();
  const int L = tree.levels();
  const Index n = h.size();
  ExtendedLayout lay;
  lay.aux_offset.resize(L + 1);
  Index next = n;
  for (int l = 1; l <= L; ++l) {
    for (Index k = 0; k < tree.node_count(l); ++k) {
      lay.aux_offset[l].push_back(next);
      next += h.v_rank(l, k);
    }
  }
  lay.size = next;
  guard_size(lay.size, guard, "extended_matrix");

  Matrix<T> e = Matrix<T>::Zero(lay.size, lay.size);
  for (Index i = 0; i < tree.leaf_count(); ++i) {
    const IndexRange r = tree.leaves()[i];
    e.block(r.start, r.start, r.size(), r.size()) = h.diagonal(i);
  }
  for (int l = 1; l <= L; ++l) {
    for (Index k = 0; k < tree.node_count(l); ++k) {
      const IndexRange r = tree.node(l, k);
      const Index own = lay.aux_offset[l][k];
      const Index sib = lay.aux_offset[l][k ^ 1];
      const Index rv = h.v_rank(l, k);
      // A(I_k, I_sib) x(I_sib) = U_k (V_sib^H x(I_sib)) = U_k y_sib
      e.block(r.start, sib, r.size(), h.u_rank(l, k)) = h.u(l, k);
      e.block(own, r.start, rv, r.size()) = h.v(l, k).adjoint();
      e.block(own, own, rv, rv) = -Matrix<T>::Identity(rv, rv);
    }
  }
  if (layout != nullptr) *layout = std::move(lay);
  return e;
}

template <Scalar T>
ExtendedSolution<T> extended_sparse_solve(const HodlrMatrix<T>& h, const Matrix<T>& b,
                                          Index guard) {
  if (b.rows() != h.size()) throw std::invalid_argument("extended_sparse_solve: bad rhs rows");
  ExtendedSolution<T> out;
  Matrix<T> e = extended_matrix(h, &out.layout, guard);
  Matrix<T> rhs = Matrix<T>::Zero(out.layout.size, b.cols());
  rhs.topRows(h.size()) = b;
  out.full = dense_solve<T>(e, rhs, guard);
  out.x = out.full.topRows(h.size());
  return out;
}

template <Scalar T>
Matrix<T> product_form_dense(const HodlrFactorization<T>& f, Index guard) {
  const auto& h = f.data();
  const ClusterTree& tree = h.tree();
  const Index n = h.size();
  guard_size(n, guard, "product_form_dense");
  Matrix<T> a = Matrix<T>::Zero(n, n);
  for (Index i = 0; i < tree.leaf_count(); ++i) {
    const IndexRange r = tree.leaves()[i];
    a.block(r.start, r.start, r.size(), r.size()) =
        lu_product<T>(h.d_big().data() + h.leaf_offset(i), r.size(), f.leaf_pivots().block_pivots(i));
  }
  for (int p = tree.levels() - 1; p >= 0; --p) {
    const int c = p + 1;
    Matrix<T> factor = Matrix<T>::Identity(n, n);
    for (Index k = 0; k < tree.node_count(c); ++k) {
      const IndexRange r = tree.node(c, k);
      const IndexRange s = tree.node(c, k ^ 1);
      factor.block(r.start, s.start, r.size(), s.size()) = h.u(c, k) * h.v(c, k ^ 1).adjoint();
    }
    a = a * factor;
  }
  return a;
}

template <Scalar T>
Matrix<T> exact_matvec(const EntryOracle<T>& a, const Matrix<T>& x, const Executor& exec,
                       Index strip) {
  const Index n = a.size();
  if (x.rows() != n) throw std::invalid_argument("exact_matvec: bad operand rows");
  if (strip < 1) throw std::invalid_argument("exact_matvec: strip must be positive");
  Matrix<T> y(n, x.cols());
  const Index count = (n + strip - 1) / strip;
  exec.parallel_for(count, [&](Index s) {
    const Index r0 = s * strip;
    const Index rows = std::min(strip, n - r0);
    Matrix<T> blk(rows, n);
    a.fill_block({r0, r0 + rows}, {0, n}, blk.data(), rows);
    y.middleRows(r0, rows).noalias() = blk * x;
  });
  return y;
}

template <Scalar T>
double relative_residual(const EntryOracle<T>& a, const Matrix<T>& x, const Matrix<T>& b,
                         const Executor& exec) {
  const double bn = static_cast<double>(b.norm());
  const Matrix<T> r = b - exact_matvec(a, x, exec);
  return bn == 0 ? static_cast<double>(r.norm()) : static_cast<double>(r.norm()) / bn;
}

#define HODLR_INSTANTIATE(T)                                                                    \
  template Matrix<T> dense_solve(const Matrix<T>&, const Matrix<T>&, Index);                    \
  template Matrix<T> dense_solve(const EntryOracle<T>&, const Matrix<T>&, Index);               \
  template LogDet<T> dense_logdet(const Matrix<T>&);                                            \
  template Matrix<T> extended_matrix(const HodlrMatrix<T>&, ExtendedLayout*, Index);            \
  template ExtendedSolution<T> extended_sparse_solve(const HodlrMatrix<T>&, const Matrix<T>&,   \
                                                     Index);                                    \
  template Matrix<T> product_form_dense(const HodlrFactorization<T>&, Index);                   \
  template Matrix<T> exact_matvec(const EntryOracle<T>&, const Matrix<T>&, const Executor&,     \
                                  Index);                                                       \
  template double relative_residual(const EntryOracle<T>&, const Matrix<T>&, const Matrix<T>&,  \
                                    const Executor&);

HODLR_INSTANTIATE(float)
HODLR_INSTANTIATE(double)
HODLR_INSTANTIATE(std::complex<float>)
HODLR_INSTANTIATE(std::complex<double>)

}  // namespace hodlr::oracle
