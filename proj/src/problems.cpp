#include "hodlr/problems.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>
#include <stdexcept>

namespace hodlr {

using std::numbers::pi;

Xorshift64Star::Xorshift64Star(std::uint64_t seed) {
  // splitmix64 scrambles the seed so small seeds still give a busy state.
  std::uint64_t z = seed + 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  state_ = z ^ (z >> 31);
  if (state_ == 0) state_ = 0x2545F4914F6CDD1DULL;
}

std::uint64_t Xorshift64Star::next() {
  state_ ^= state_ >> 12;
  state_ ^= state_ << 25;
  state_ ^= state_ >> 27;
  return state_ * 0x2545F4914F6CDD1DULL;
}

double Xorshift64Star::uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

PointSet1D PointSet1D::uniform(Index n, std::uint64_t seed) {
  if (n < 2) throw std::invalid_argument("PointSet1D: need at least two points");
  Xorshift64Star rng(seed);
  PointSet1D ps;
  ps.points.resize(n);
  for (auto& p : ps.points) p = rng.uniform(-1.0, 1.0);
  std::sort(ps.points.begin(), ps.points.end());
  double gap = ps.points[1] - ps.points[0];
  for (Index i = 2; i < n; ++i) gap = std::min(gap, ps.points[i] - ps.points[i - 1]);
  if (!(gap > 0)) throw std::runtime_error("PointSet1D: duplicate points; choose another seed");
  ps.a = gap / 2;
  return ps;
}

double rpy_entry(double r, double a, const RpyParams& p) {
  const double kt = p.k * p.temperature;
  r = std::abs(r);
  if (r >= 2 * a) return kt / (8 * pi * p.eta * r) * (2 - 4 * a * a / (3 * r * r));
  return kt / (6 * pi * p.eta * a) * (1 - 3 * r / (16 * a));
}

RpyOracle::RpyOracle(PointSet1D points, RpyParams params)
    : ps_(std::move(points)), params_(params) {
  if (!(ps_.a > 0)) throw std::invalid_argument("RpyOracle: radius a must be positive");
}

double RpyOracle::entry(Index i, Index j) const {
  return rpy_entry(ps_.points[i] - ps_.points[j], ps_.a, params_);
}

Contour Contour::star(Index n, double amplitude, int lobes) {
  if (n < 16) throw std::invalid_argument("Contour: need at least 16 nodes");
  if (std::abs(amplitude) >= 1) throw std::invalid_argument("Contour: |amplitude| must be < 1");
  Contour c;
  for (auto* v : {&c.x, &c.y, &c.nx, &c.ny, &c.tx, &c.ty, &c.curvature, &c.ds}) v->resize(n);
  const double h = 2 * pi / static_cast<double>(n);
  const double k = lobes;
  for (Index j = 0; j < n; ++j) {
    const double t = h * static_cast<double>(j);
    const double ct = std::cos(t), st = std::sin(t);
    const double r = 1 + amplitude * std::cos(k * t);
    const double r1 = -amplitude * k * std::sin(k * t);
    const double r2 = -amplitude * k * k * std::cos(k * t);
    const double x1 = r1 * ct - r * st;
    const double y1 = r1 * st + r * ct;
    const double x2 = r2 * ct - 2 * r1 * st - r * ct;
    const double y2 = r2 * st + 2 * r1 * ct - r * st;
    const double speed = std::hypot(x1, y1);
    c.x[j] = r * ct;
    c.y[j] = r * st;
    c.tx[j] = x1 / speed;
    c.ty[j] = y1 / speed;
    c.nx[j] = y1 / speed;
    c.ny[j] = -x1 / speed;
    c.curvature[j] = (x1 * y2 - y1 * x2) / (speed * speed * speed);
    c.ds[j] = speed * h;
  }
  return c;
}

double Contour::length() const {
  double s = 0;
  for (double w : ds) s += w;
  return s;
}

Contour contour_default(Index n) { return Contour::star(n, 0.3, 5); }

namespace {

void check_distinct(const Contour& c) {
  for (Index j = 0; j < c.size(); ++j) {
    const Index k = (j + 1) % c.size();
    if (c.x[j] == c.x[k] && c.y[j] == c.y[k]) {
      throw std::invalid_argument("contour has coincident nodes " + std::to_string(j) + " and " +
                                  std::to_string(k));
    }
  }
}

}  // namespace

LaplaceDoubleLayerOracle::LaplaceDoubleLayerOracle(Contour c, double zx, double zy)
    : c_(std::move(c)), zx_(zx), zy_(zy) {
  check_distinct(c_);
}

double LaplaceDoubleLayerOracle::entry(Index i, Index j) const {
  const double lx = std::log(std::hypot(c_.x[i] - zx_, c_.y[i] - zy_)) / (2 * pi);
  double d;
  if (i == j) {
    d = -c_.curvature[i] / (4 * pi);
  } else {
    const double dx = c_.x[i] - c_.x[j];
    const double dy = c_.y[i] - c_.y[j];
    d = (c_.nx[j] * dx + c_.ny[j] * dy) / (2 * pi * (dx * dx + dy * dy));
  }
  return (i == j ? 0.5 : 0.0) + (d - lx) * c_.ds[j];
}

double LaplaceDoubleLayerOracle::evaluate(const std::vector<double>& sigma, double px,
                                          double py) const {
  const double lx = std::log(std::hypot(px - zx_, py - zy_)) / (2 * pi);
  double u = 0;
  for (Index j = 0; j < c_.size(); ++j) {
    const double dx = px - c_.x[j];
    const double dy = py - c_.y[j];
    const double d = (c_.nx[j] * dx + c_.ny[j] * dy) / (2 * pi * (dx * dx + dy * dy));
    u += (d - lx) * sigma[j] * c_.ds[j];
  }
  return u;
}

double laplace_source_field(double sx, double sy, double px, double py) {
  return -std::log(std::hypot(px - sx, py - sy)) / (2 * pi);
}

std::complex<double> hankel1(int order, double x) {
  const double v = order;
  return {std::cyl_bessel_j(v, x), std::cyl_neumann(v, x)};
}

std::complex<double> helmholtz_green_radial(double kr) {
  return std::complex<double>(0, 0.25) * hankel1(0, kr);
}

HelmholtzCombinedOracle::HelmholtzCombinedOracle(Contour c, double kappa, double eta)
    : c_(std::move(c)), kappa_(kappa), eta_(eta) {
  if (!(kappa > 0)) throw std::invalid_argument("HelmholtzCombinedOracle: kappa must be > 0");
  check_distinct(c_);
}

std::complex<double> HelmholtzCombinedOracle::kernel(double px, double py, Index j) const {
  using C = std::complex<double>;
  const double dx = px - c_.x[j];
  const double dy = py - c_.y[j];
  const double rho = std::hypot(dx, dy);
  const double kr = kappa_ * rho;
  const C h0 = hankel1(0, kr);
  const C h1 = hankel1(1, kr);
  const C d = C(0, kappa_ / 4) * h1 * ((c_.nx[j] * dx + c_.ny[j] * dy) / rho);
  const C s = C(0, 0.25) * h0;
  return d + C(0, eta_) * s;
}

std::complex<double> HelmholtzCombinedOracle::entry(Index i, Index j) const {
  if (i == j) return {0.5, 0.0};
  return kernel(c_.x[i], c_.y[i], j) * c_.ds[j];
}

std::complex<double> HelmholtzCombinedOracle::evaluate(const std::vector<std::complex<double>>& sigma,
                                                       double px, double py) const {
  std::complex<double> u = 0;
  for (Index j = 0; j < c_.size(); ++j) u += kernel(px, py, j) * sigma[j] * c_.ds[j];
  return u;
}

std::complex<double> helmholtz_source_field(double kappa, double sx, double sy, double px,
                                            double py) {
  return helmholtz_green_radial(kappa * std::hypot(px - sx, py - sy));
}

template <Scalar T>
HodlrMatrix<T> synthetic_hodlr(const ClusterTree& tree, Index rank, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  auto draw = [&]() -> T {
    if constexpr (is_complex_v<T>) {
      const double re = rng.uniform(-1, 1);
      return T(static_cast<real_t<T>>(re), static_cast<real_t<T>>(rng.uniform(-1, 1)));
    } else {
      return static_cast<T>(rng.uniform(-1, 1));
    }
  };
  const int L = tree.levels();
  std::vector<std::vector<Index>> ranks(L + 1);
  for (int l = 1; l <= L; ++l) {
    for (Index k = 0; k < tree.node_count(l); ++k) {
      ranks[l].push_back(std::min({rank, tree.node(l, k).size(), tree.node(l, k ^ 1).size()}));
    }
  }
  HodlrMatrix<T> h(tree, ranks);
  for (int l = 1; l <= L; ++l) {
    // Each off-diagonal block has norm O(1/sqrt(L)), so the whole
    // off-diagonal part stays well below the diagonal shift.
    for (Index k = 0; k < tree.node_count(l); ++k) {
      const double nu = static_cast<double>(tree.node(l, k).size());
      const double nv = static_cast<double>(tree.node(l, k ^ 1).size());
      const auto su = static_cast<real_t<T>>(1.0 / std::sqrt(nu * L));
      const auto sv = static_cast<real_t<T>>(1.0 / std::sqrt(nv));
      auto u = h.u(l, k);
      auto v = h.v(l, k ^ 1);
      for (Index j = 0; j < u.cols(); ++j)
        for (Index i = 0; i < u.rows(); ++i) u(i, j) = draw() * su;
      for (Index j = 0; j < v.cols(); ++j)
        for (Index i = 0; i < v.rows(); ++i) v(i, j) = draw() * sv;
    }
  }
  for (Index leaf = 0; leaf < tree.leaf_count(); ++leaf) {
    auto d = h.diagonal(leaf);
    const Index m = d.rows();
    const auto scale = static_cast<real_t<T>>(1.0 / std::sqrt(static_cast<double>(m)));
    for (Index j = 0; j < m; ++j)
      for (Index i = 0; i < m; ++i) d(i, j) = draw() * scale;
    for (Index i = 0; i < m; ++i) {
      const real_t<T> sign = rng.uniform() < 0.5 ? -1 : 1;
      d(i, i) += T(4 * sign);
    }
  }
  return h;
}

template HodlrMatrix<float> synthetic_hodlr(const ClusterTree&, Index, std::uint64_t);
template HodlrMatrix<double> synthetic_hodlr(const ClusterTree&, Index, std::uint64_t);
template HodlrMatrix<std::complex<float>> synthetic_hodlr(const ClusterTree&, Index, std::uint64_t);
template HodlrMatrix<std::complex<double>> synthetic_hodlr(const ClusterTree&, Index, std::uint64_t);

}  // namespace hodlr
