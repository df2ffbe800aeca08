#pragma once

// Helpers shared by the unit tests and the acceptance binary.

#include <cstring>
#include <random>
#include <vector>

#include "hodlr/factorization.hpp"
#include "hodlr/hodlr_matrix.hpp"
#include "hodlr/oracle.hpp"
#include "hodlr/problems.hpp"
#include "hodlr/solver.hpp"

namespace hodlr::testing {

template <Scalar T>
Matrix<T> random_matrix(Index rows, Index cols, std::mt19937_64& rng, double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix<T> m(rows, cols);
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < rows; ++i) {
      if constexpr (is_complex_v<T>) {
        m(i, j) = T(static_cast<real_t<T>>(u(rng)), static_cast<real_t<T>>(u(rng)));
      } else {
        m(i, j) = static_cast<T>(u(rng));
      }
    }
  }
  return m;
}

template <Scalar T>
double rel_error(const Matrix<T>& got, const Matrix<T>& want) {
  const double d = static_cast<double>((got - want).norm());
  const double w = static_cast<double>(want.norm());
  return w == 0 ? d : d / w;
}

/// [[2,1],[1,2]] on a two-leaf tree with unit rank-1 bases.
inline HodlrMatrix<double> two_by_two() {
  HodlrMatrix<double> h(ClusterTree::with_levels(2, 1), {{}, {1, 1}});
  h.diagonal(0)(0, 0) = 2;
  h.diagonal(1)(0, 0) = 2;
  h.u(1, 0)(0, 0) = 1;
  h.u(1, 1)(0, 0) = 1;
  h.v(1, 0)(0, 0) = 1;
  h.v(1, 1)(0, 0) = 1;
  return h;
}

inline std::shared_ptr<RpyOracle> rpy_problem(Index n, std::uint64_t seed = 1) {
  return std::make_shared<RpyOracle>(PointSet1D::uniform(n, seed), RpyParams{});
}

inline std::shared_ptr<LaplaceDoubleLayerOracle> laplace_problem(Index n) {
  return std::make_shared<LaplaceDoubleLayerOracle>(contour_default(n));
}

inline std::shared_ptr<HelmholtzCombinedOracle> helmholtz_problem(Index n, double kappa = 20,
                                                                  double eta = 20) {
  return std::make_shared<HelmholtzCombinedOracle>(contour_default(n), kappa, eta);
}

template <Scalar T>
HodlrMatrix<T> assemble_problem(const EntryOracle<T>& a, Index leaf_size, double tol,
                                const Executor& exec = Executor::serial()) {
  CompressionConfig cfg;
  cfg.tol = tol;
  return assemble(a, ClusterTree::build(a.size(), leaf_size), cfg, exec);
}

template <class T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

template <Scalar T>
bool same_bits(const Matrix<T>& a, const Matrix<T>& b) {
  return a.rows() == b.rows() && a.cols() == b.cols() &&
         std::memcmp(a.data(), b.data(), static_cast<std::size_t>(a.size()) * sizeof(T)) == 0;
}

/// Every stored buffer of two factorizations matches bit for bit.
template <Scalar T>
bool same_bits(const HodlrFactorization<T>& a, const HodlrFactorization<T>& b) {
  if (a.levels() != b.levels()) return false;
  if (!same_bits(a.data().d_big(), b.data().d_big())) return false;
  if (a.leaf_pivots().pivots != b.leaf_pivots().pivots) return false;
  for (int l = 1; l <= a.levels(); ++l) {
    if (!same_bits(a.data().u_panel(l).data, b.data().u_panel(l).data)) return false;
    if (!same_bits(a.data().v_panel(l).data, b.data().v_panel(l).data)) return false;
  }
  for (int l = 0; l < a.levels(); ++l) {
    if (!same_bits(a.k_big(l), b.k_big(l))) return false;
    if (a.k_pivots(l).pivots != b.k_pivots(l).pivots) return false;
  }
  return true;
}

/// Relative Frobenius error between the dense inverse of
///   M = I + [[0, Y_a V_b^H], [Y_b V_a^H, 0]]
/// and I - S K^{-1} R, where K comes from form_k_block and R / S place the
/// V^H rows and Y columns at the offsets the variant's layout prescribes.
template <Scalar T>
double woodbury_error(std::uint64_t seed, KVariant variant, Index max_dim = 64,
                      Index max_rank = 8) {
  std::mt19937_64 rng(seed);
  std::uniform_int_distribution<Index> half(1, max_dim / 2);
  const Index n1 = half(rng), n2 = half(rng), n = n1 + n2;
  std::uniform_int_distribution<Index> rk(0, max_rank);
  const Index p = std::min(rk(rng), n1);
  const Index q = std::min(rk(rng), n2);
  const double s = 0.5;
  const Matrix<T> ya = random_matrix<T>(n1, p, rng, s / std::sqrt(double(n1)));
  const Matrix<T> yb = random_matrix<T>(n2, q, rng, s / std::sqrt(double(n2)));
  const Matrix<T> va = random_matrix<T>(n1, q, rng, s / std::sqrt(double(n1)));
  const Matrix<T> vb = random_matrix<T>(n2, p, rng, s / std::sqrt(double(n2)));

  Matrix<T> m = Matrix<T>::Identity(n, n);
  m.block(0, n1, n1, n2) = ya * vb.adjoint();
  m.block(n1, 0, n2, n1) = yb * va.adjoint();
  const Matrix<T> inv = oracle::dense_solve<T>(m, Matrix<T>::Identity(n, n));

  const Matrix<T> k = form_k_block<T>(va.adjoint() * ya, vb.adjoint() * yb, variant);
  const KLayout lay = KLayout::of(variant, p, q);
  Matrix<T> r = Matrix<T>::Zero(p + q, n);
  r.block(lay.rhs_a, 0, q, n1) = va.adjoint();
  r.block(lay.rhs_b, n1, p, n2) = vb.adjoint();
  Matrix<T> sm = Matrix<T>::Zero(n, p + q);
  sm.block(0, lay.sol_a, n1, p) = ya;
  sm.block(n1, lay.sol_b, n2, q) = yb;
  Matrix<T> wood = Matrix<T>::Identity(n, n);
  if (p + q > 0) wood -= sm * oracle::dense_solve<T>(k, r);
  return rel_error<T>(wood, inv);
}

}  // namespace hodlr::testing
