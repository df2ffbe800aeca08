#pragma once

#include <complex>
#include <cstdint>
#include <memory>
#include <vector>

#include "hodlr/entry_oracle.hpp"
#include "hodlr/hodlr_matrix.hpp"

namespace hodlr {

/// xorshift64* generator; the same seed gives the same stream on every
/// platform.
class Xorshift64Star {
 public:
  explicit Xorshift64Star(std::uint64_t seed);
  std::uint64_t next();
  /// Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

 private:
  std::uint64_t state_;
};

/// Sorted points in [-1, 1] and the regularization radius a.
struct PointSet1D {
  std::vector<double> points;
  double a = 0;

  /// n uniform points, sorted; a = half the smallest gap.
  static PointSet1D uniform(Index n, std::uint64_t seed);
};

struct RpyParams {
  double k = 1;
  double temperature = 1;
  double eta = 1;
};

/// Scalar RPY kernel for points on a line (the r r^T / r^2 factor is 1).
double rpy_entry(double r, double a, const RpyParams& params);

class RpyOracle final : public EntryOracle<double> {
 public:
  RpyOracle(PointSet1D points, RpyParams params);
  Index size() const override { return static_cast<Index>(ps_.points.size()); }
  double entry(Index i, Index j) const override;
  const PointSet1D& points() const { return ps_; }

 private:
  PointSet1D ps_;
  RpyParams params_;
};

/// Samples of the closed curve r(t) = 1 + amplitude * cos(lobes * t) at
/// t_j = 2 pi j / n, traversed counterclockwise. Normals point out of the
/// enclosed region.
struct Contour {
  std::vector<double> x, y;
  std::vector<double> nx, ny;
  std::vector<double> tx, ty;
  std::vector<double> curvature;
  /// Trapezoidal arclength weights |gamma'(t_j)| * 2 pi / n.
  std::vector<double> ds;

  static Contour star(Index n, double amplitude, int lobes);
  Index size() const { return static_cast<Index>(x.size()); }
  double length() const;
};

/// r(t) = 1 + 0.3 cos(5t). Requires n >= 16.
Contour contour_default(Index n);

/// Exterior Dirichlet Laplace problem, second kind:
///   A_ij = delta_ij / 2 + [d(x_i, y_j) - log|x_i - z| / (2 pi)] ds_j,
///   d(x, y) = n(y).(x - y) / (2 pi |x - y|^2),  d(x, x) = -curvature / (4 pi).
class LaplaceDoubleLayerOracle final : public EntryOracle<double> {
 public:
  LaplaceDoubleLayerOracle(Contour c, double zx = 0, double zy = 0);
  Index size() const override { return c_.size(); }
  double entry(Index i, Index j) const override;
  const Contour& contour() const { return c_; }

  /// Potential of density sigma at an off-curve point.
  double evaluate(const std::vector<double>& sigma, double px, double py) const;

 private:
  Contour c_;
  double zx_, zy_;
};

/// -(1/2pi) log|x - s|: the exterior field of a point source at s.
double laplace_source_field(double sx, double sy, double px, double py);

/// (i/4) H0^(1)(x)
std::complex<double> helmholtz_green_radial(double kr);
std::complex<double> hankel1(int order, double x);

/// Exterior Dirichlet Helmholtz problem, combined field:
///   A_ij = delta_ij / 2 + (d_k(x_i, y_j) + i eta s_k(x_i, y_j)) ds_j  (i != j),
///   s_k = (i/4) H0(k rho),  d_k = (i k / 4) H1(k rho) n(y).(x - y) / rho.
/// The self term is dropped from the quadrature (punctured trapezoid).
class HelmholtzCombinedOracle final : public EntryOracle<std::complex<double>> {
 public:
  HelmholtzCombinedOracle(Contour c, double kappa, double eta);
  Index size() const override { return c_.size(); }
  std::complex<double> entry(Index i, Index j) const override;
  const Contour& contour() const { return c_; }

  std::complex<double> evaluate(const std::vector<std::complex<double>>& sigma, double px,
                                double py) const;

 private:
  std::complex<double> kernel(double px, double py, Index j) const;

  Contour c_;
  double kappa_, eta_;
};

/// (i/4) H0^(1)(kappa |x - s|): radiating field of a point source at s.
std::complex<double> helmholtz_source_field(double kappa, double sx, double sy, double px,
                                            double py);

/// Random HODLR matrix with every off-diagonal rank equal to `rank`
/// (clamped to the block size). Leaf blocks are random with a dominant
/// diagonal of random sign, so the matrix is well conditioned.
template <Scalar T>
HodlrMatrix<T> synthetic_hodlr(const ClusterTree& tree, Index rank, std::uint64_t seed);

}  // namespace hodlr
