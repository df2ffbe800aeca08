#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <Eigen/SVD>
#include <cmath>
#include <functional>
#include <numbers>

#include "support.hpp"

using namespace hodlr;
using namespace hodlr::testing;
using std::numbers::pi;

namespace {

/// Adaptive Simpson on [a, b].
double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double tol,
                        int depth = 0) {
  const double c = (a + b) / 2, h = b - a;
  const double fa = f(a), fb = f(b), fc = f(c);
  const double whole = h / 6 * (fa + 4 * fc + fb);
  const double left = h / 12 * (fa + 4 * f((a + c) / 2) + fc);
  const double right = h / 12 * (fc + 4 * f((c + b) / 2) + fb);
  if (depth > 40 || std::abs(left + right - whole) <= 15 * tol) {
    return left + right + (left + right - whole) / 15;
  }
  return adaptive_simpson(f, a, c, tol / 2, depth + 1) +
         adaptive_simpson(f, c, b, tol / 2, depth + 1);
}

}  // namespace

TEST_CASE("xorshift stream is reproducible") {
  Xorshift64Star a(42), b(42), c(43);
  for (int i = 0; i < 100; ++i) {
    const auto x = a.next();
    CHECK(x == b.next());
    CHECK(x != c.next());
  }
  for (int i = 0; i < 1000; ++i) {
    const double u = a.uniform();
    CHECK(u >= 0);
    CHECK(u < 1);
  }
}

TEST_CASE("point set is sorted with a = half the smallest gap") {
  const auto ps = PointSet1D::uniform(500, 3);
  double gap = 1e300;
  for (std::size_t i = 1; i < ps.points.size(); ++i) {
    CHECK(ps.points[i] > ps.points[i - 1]);
    gap = std::min(gap, ps.points[i] - ps.points[i - 1]);
  }
  CHECK(ps.a == gap / 2);
  CHECK(ps.points.front() >= -1);
  CHECK(ps.points.back() <= 1);
}

TEST_CASE("RPY kernel values") {
  const RpyParams p{};
  const double a = 0.01;
  CHECK(rpy_entry(0, a, p) == doctest::Approx(1 / (6 * pi * a)).epsilon(1e-15));
  // Both branches at r = 2a.
  const double far = 1 / (8 * pi * 2 * a) * (2 - 4 * a * a / (3 * 4 * a * a));
  const double near = 1 / (6 * pi * a) * (1 - 3 * 2 * a / (16 * a));
  CHECK(std::abs(far - near) <= 1e-15 * far);
  CHECK(std::abs(rpy_entry(2 * a, a, p) - 5 / (48 * pi * a)) <= 1e-15 * far);
  CHECK(std::abs(rpy_entry(std::nextafter(2 * a, 0.0), a, p) - 5 / (48 * pi * a)) <=
        1e-14 * far);
  const double want = 1 / (4 * pi * 0.5) * (1 - 2 * 0.0001 / (3 * 0.25));
  CHECK(rpy_entry(0.5, a, p) == doctest::Approx(want).epsilon(1e-15));
  CHECK(rpy_entry(-0.5, a, p) == rpy_entry(0.5, a, p));
  // k T / eta scaling
  CHECK(rpy_entry(0.5, a, RpyParams{2, 3, 4}) == doctest::Approx(want * 6 / 4).epsilon(1e-15));
}

TEST_CASE("RPY oracle is exactly symmetric") {
  auto a = rpy_problem(300, 9);
  for (Index i = 0; i < 300; i += 7)
    for (Index j = 0; j < 300; j += 3) CHECK(a->entry(i, j) == a->entry(j, i));
}

TEST_CASE("contour geometry") {
  const Contour c = contour_default(64);
  const auto speed = [](double t) {
    const double r = 1 + 0.3 * std::cos(5 * t), r1 = -1.5 * std::sin(5 * t);
    return std::sqrt(r * r + r1 * r1);
  };
  const double length = adaptive_simpson(speed, 0, 2 * pi, 1e-14);
  CHECK(std::abs(c.length() - length) <= 1e-10);
  for (Index j = 0; j < c.size(); ++j) {
    CHECK(std::abs(c.nx[j] * c.tx[j] + c.ny[j] * c.ty[j]) <= 1e-14);
    CHECK(std::hypot(c.nx[j], c.ny[j]) == doctest::Approx(1).epsilon(1e-15));
    // exterior: the normal points away from the origin on a star domain
    CHECK(c.nx[j] * c.x[j] + c.ny[j] * c.y[j] > 0);
  }
  const Contour circle = Contour::star(32, 0, 5);
  for (Index j = 0; j < circle.size(); ++j) CHECK(circle.curvature[j] == doctest::Approx(1));
  CHECK_THROWS_AS(contour_default(15), std::invalid_argument);
}

TEST_CASE("double-layer kernel on the unit circle is constant") {
  const Contour c = Contour::star(40, 0, 1);
  LaplaceDoubleLayerOracle a(c, 0, 0);
  // With z at the origin the log term vanishes on the unit circle.
  for (Index i = 0; i < 40; i += 3) {
    for (Index j = 0; j < 40; ++j) {
      const double d = a.entry(i, j) / c.ds[j] - (i == j ? 0.5 / c.ds[j] : 0.0);
      CHECK(d == doctest::Approx(-1 / (4 * pi)).epsilon(1e-12));
    }
  }
}

TEST_CASE("Laplace exterior point-source field") {
  const Index n = 256;
  LaplaceDoubleLayerOracle a(contour_default(n));
  const Contour& c = a.contour();
  const double sx = 0.2, sy = -0.1;
  Matrix<double> f(n, 1);
  for (Index i = 0; i < n; ++i) f(i) = laplace_source_field(sx, sy, c.x[i], c.y[i]);
  const Matrix<double> sigma = oracle::dense_solve<double>(a, f);
  const std::vector<double> s(sigma.data(), sigma.data() + n);
  for (auto [px, py] : {std::pair{3.0, 1.0}, std::pair{-2.5, -4.0}}) {
    const double u = a.evaluate(s, px, py);
    CHECK(std::abs(u - laplace_source_field(sx, sy, px, py)) <= 1e-10);
  }
}

TEST_CASE("Laplace system is well conditioned") {
  const Matrix<double> a = materialize(*laplace_problem(512));
  Eigen::JacobiSVD<Matrix<double>> svd(a);
  const auto& s = svd.singularValues();
  MESSAGE("cond = " << s(0) / s(s.size() - 1));
  CHECK(s(0) / s(s.size() - 1) < 100);
}

TEST_CASE("Hankel function reference values") {
  const auto s = helmholtz_green_radial(1.0);
  CHECK(s.real() == doctest::Approx(-0.0220642).epsilon(1e-5));
  CHECK(s.imag() == doctest::Approx(0.1912994).epsilon(1e-6));
  // J0, Y0, J1, Y1 at x = 2.5 from standard tables
  CHECK(hankel1(0, 2.5).real() == doctest::Approx(-0.0483837764681979).epsilon(1e-13));
  CHECK(hankel1(0, 2.5).imag() == doctest::Approx(0.498070359615232).epsilon(1e-13));
  CHECK(hankel1(1, 2.5).real() == doctest::Approx(0.497094102464274).epsilon(1e-13));
  CHECK(hankel1(1, 2.5).imag() == doctest::Approx(0.145918137966786).epsilon(1e-12));
}

TEST_CASE("Helmholtz oracle: zero coupling leaves the double layer") {
  const Contour c = contour_default(64);
  HelmholtzCombinedOracle a(c, 5, 0), b(c, 5, 2);
  for (Index i = 0; i < 64; i += 5) {
    for (Index j = 0; j < 64; j += 3) {
      if (i == j) {
        CHECK(a.entry(i, j) == std::complex<double>(0.5, 0));
        continue;
      }
      const double rho = std::hypot(c.x[i] - c.x[j], c.y[i] - c.y[j]);
      const auto s = helmholtz_green_radial(5 * rho) * c.ds[j];
      const auto diff = b.entry(i, j) - a.entry(i, j);
      CHECK(std::abs(diff - std::complex<double>(0, 2) * s) <= 1e-14 * std::abs(s));
    }
  }
  CHECK_THROWS_AS(HelmholtzCombinedOracle(c, 0, 1), std::invalid_argument);
}

namespace {

/// Relative error of the exterior field at two test points for an interior
/// point source, solved through the HODLR factorization.
std::vector<double> helmholtz_field_errors(Index n, double kappa) {
  using C = std::complex<double>;
  HelmholtzCombinedOracle a(contour_default(n), kappa, kappa);
  const Contour& c = a.contour();
  const double sx = 0.1, sy = 0.2;
  Matrix<C> f(n, 1);
  for (Index i = 0; i < n; ++i) f(i) = helmholtz_source_field(kappa, sx, sy, c.x[i], c.y[i]);
  const Matrix<C> sigma = solve(factorize(assemble_problem<C>(a, 64, 1e-12)), f);
  const std::vector<C> s(sigma.data(), sigma.data() + n);
  std::vector<double> errs;
  for (auto [px, py] : {std::pair{3.0, 0.5}, std::pair{-1.0, -4.0}}) {
    const C want = helmholtz_source_field(kappa, sx, sy, px, py);
    errs.push_back(std::abs(a.evaluate(s, px, py) - want) / std::abs(want));
  }
  return errs;
}

}  // namespace

TEST_CASE("Helmholtz exterior point-source field at low order") {
  // Dropping the log-singular self term leaves an O(h log h) quadrature
  // error, so check the level at N = 2048 and the rate from N = 1024.
  const auto coarse = helmholtz_field_errors(1024, 5);
  const auto fine = helmholtz_field_errors(2048, 5);
  for (std::size_t k = 0; k < fine.size(); ++k) {
    MESSAGE("relative field error " << coarse[k] << " -> " << fine[k]);
    CHECK(fine[k] <= 5e-2);
    CHECK(fine[k] <= 0.65 * coarse[k]);
  }
}

TEST_CASE("RPY off-diagonal ranks stay bounded at 2^13") {
  auto a = rpy_problem(8192, 1);
  auto h = assemble_problem<double>(*a, 64, 1e-12);
  for (int l = 1; l <= h.levels(); ++l) CHECK(h.max_rank(l) <= 96);
}
