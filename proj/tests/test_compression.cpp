#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <limits>
#include <random>

#include "hodlr/compression.hpp"

using namespace hodlr;

namespace {

Index svd_rank(const Matrix<double>& a, double tol) {
  Eigen::JacobiSVD<Matrix<double>> svd(a);
  const auto& s = svd.singularValues();
  Index k = 0;
  while (k < s.size() && s[k] > tol * s[0]) ++k;
  return k;
}

double rel_err(const Matrix<double>& a, const LowRankFactor<double>& f) {
  return (a - f.dense()).norm() / a.norm();
}

const CompressionMethod kAca[] = {CompressionMethod::aca_partial_pivot,
                                  CompressionMethod::aca_rook_pivot};

}  // namespace

TEST_CASE("exact small ranks") {
  Matrix<double> a(20, 30);
  for (Index i = 0; i < 20; ++i)
    for (Index j = 0; j < 30; ++j) a(i, j) = (i + 1.0) * std::cos(0.3 * j);
  for (auto m : {CompressionMethod::aca_partial_pivot, CompressionMethod::aca_rook_pivot,
                 CompressionMethod::dense_svd}) {
    CompressionConfig cfg;
    cfg.method = m;
    auto f = compress_dense(a, cfg);
    CHECK(f.rank() == 1);
    CHECK(rel_err(a, f) < 1e-14);
    auto z = compress_dense(Matrix<double>::Zero(12, 9).eval(), cfg);
    CHECK(z.rank() == 0);
    CHECK(z.u.rows() == 12);
    CHECK(z.v.rows() == 9);
  }
}

TEST_CASE("ACA rank tracks the SVD rank on a smooth kernel block") {
  Matrix<double> a(64, 64);
  for (Index i = 0; i < 64; ++i)
    for (Index j = 0; j < 64; ++j) a(i, j) = 1.0 / (1.0 + std::abs(double(i - j + 128)));
  const Index want = svd_rank(a, 1e-10);
  for (auto m : kAca) {
    CompressionConfig cfg;
    cfg.tol = 1e-10;
    cfg.method = m;
    const auto f = compress_dense(a, cfg);
    CAPTURE(to_string(m));
    CHECK(std::abs(f.rank() - want) <= 1);
  }
  CompressionConfig cfg;
  cfg.tol = 1e-10;
  cfg.method = CompressionMethod::dense_svd;
  CHECK(compress_dense(a, cfg).rank() == want);
}

TEST_CASE("ACA accuracy within 10 tol and monotone ranks") {
  std::mt19937_64 rng(7);
  std::uniform_real_distribution<double> u(-1, 1);
  for (int trial = 0; trial < 6; ++trial) {
    const Index m = 40 + 13 * trial, n = 128 - 9 * trial;
    const double shift = 1.5 + trial;
    Vector<double> x(m), y(n);
    for (Index i = 0; i < m; ++i) x[i] = u(rng);
    for (Index j = 0; j < n; ++j) y[j] = shift + u(rng);
    Matrix<double> a(m, n);
    for (Index i = 0; i < m; ++i)
      for (Index j = 0; j < n; ++j) a(i, j) = std::log(std::abs(x[i] - y[j])) + 1.0 / (x[i] - y[j]);
    for (auto meth : kAca) {
      Index prev = -1;
      for (double tol : {1e-4, 1e-6, 1e-8, 1e-10, 1e-12}) {
        CompressionConfig cfg;
        cfg.tol = tol;
        cfg.method = meth;
        const auto f = compress_dense(a, cfg);
        CHECK(rel_err(a, f) <= 10 * tol);
        CHECK(f.rank() >= prev);
        CHECK_FALSE(f.truncated);
        prev = f.rank();
      }
    }
  }
}

TEST_CASE("dense_svd error equals discarded tail") {
  Matrix<double> a(50, 40);
  for (Index i = 0; i < 50; ++i)
    for (Index j = 0; j < 40; ++j) a(i, j) = std::exp(-0.05 * (i - j) * (i - j));
  CompressionConfig cfg;
  cfg.tol = 1e-6;
  cfg.method = CompressionMethod::dense_svd;
  const auto f = compress_dense(a, cfg);
  Eigen::JacobiSVD<Matrix<double>> svd(a);
  const auto& s = svd.singularValues();
  const double tail = s.tail(s.size() - f.rank()).norm();
  CHECK((a - f.dense()).norm() == doctest::Approx(tail).epsilon(1e-6));
}

TEST_CASE("rank cap and truncation flag") {
  Matrix<double> a = Matrix<double>::Random(30, 30);
  for (auto meth : {CompressionMethod::aca_rook_pivot, CompressionMethod::dense_svd}) {
    CompressionConfig cfg;
    cfg.tol = 1e-12;
    cfg.max_rank = 5;
    cfg.method = meth;
    const auto f = compress_dense(a, cfg);
    CHECK(f.rank() == 5);
    CHECK(f.truncated);
  }
}

TEST_CASE("non-finite entries are an error") {
  FunctionOracle<double> bad(10, [](Index i, Index j) {
    return i == 3 && j == 7 ? std::numeric_limits<double>::quiet_NaN() : 1.0 / (1 + i + j);
  });
  CompressionConfig cfg;
  CHECK_THROWS_AS(compress(bad, {0, 5}, {5, 10}, cfg), NonFiniteEntryError);
  cfg.method = CompressionMethod::dense_svd;
  CHECK_THROWS_AS(compress(bad, {0, 5}, {5, 10}, cfg), NonFiniteEntryError);
}

TEST_CASE("complex blocks use V conjugate transpose") {
  using C = std::complex<double>;
  Matrix<C> a(24, 20);
  for (Index i = 0; i < 24; ++i)
    for (Index j = 0; j < 20; ++j) a(i, j) = std::exp(C(0, 0.2 * i * j / 20.0)) / (3.0 + i + j);
  for (auto meth : {CompressionMethod::aca_rook_pivot, CompressionMethod::dense_svd}) {
    CompressionConfig cfg;
    cfg.tol = 1e-10;
    cfg.method = meth;
    const auto f = compress_dense(a, cfg);
    CHECK((a - f.u * f.v.adjoint()).norm() / a.norm() <= 1e-9);
    CHECK(f.rank() < 20);
  }
}

TEST_CASE("recompress") {
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g;
  auto randm = [&](Index r, Index c) {
    Matrix<double> m(r, c);
    for (Index i = 0; i < m.size(); ++i) m.data()[i] = g(rng);
    return m;
  };
  LowRankFactor<double> dup;
  dup.u = randm(30, 4);
  dup.v = randm(25, 4);
  dup.u.col(3) = dup.u.col(2);
  dup.v.col(3) = dup.v.col(2);
  const auto d = recompress(dup, 1e-12);
  CHECK(d.rank() <= 3);
  CHECK((d.dense() - dup.dense()).norm() <= 1e-12 * dup.dense().norm());

  LowRankFactor<double> ortho;
  ortho.u = Eigen::HouseholderQR<Matrix<double>>(randm(20, 6)).householderQ() * Matrix<double>::Identity(20, 6);
  ortho.v = Eigen::HouseholderQR<Matrix<double>>(randm(18, 6)).householderQ() * Matrix<double>::Identity(18, 6);
  CHECK(recompress(ortho, 1e-15).rank() == 6);

  // Rank-8 product carried in 16 columns.
  const Matrix<double> b = randm(40, 8) * randm(8, 35);
  LowRankFactor<double> padded;
  padded.u = b * randm(35, 16);
  padded.v = randm(35, 16);
  const Matrix<double> full = padded.dense();
  REQUIRE(svd_rank(full, 1e-10) == 8);
  const auto r = recompress(padded, 1e-10);
  CHECK(r.rank() == 8);
  CHECK((r.dense() - full).norm() <= 1e-10 * full.norm());
}
