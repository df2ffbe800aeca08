#include "hodlr/solver.hpp"

#include <cmath>
#include <limits>
#include <stdexcept>

#include "dispatch.hpp"
#include "hodlr/hodlr_matrix.hpp"

namespace hodlr {

template <Scalar T>
Matrix<T> solve(const HodlrFactorization<T>& f, const Matrix<T>& b, SolveStats* stats,
                const Executor& exec) {
  using namespace batched;
  const Index n = f.size();
  if (b.rows() != n) {
    throw std::invalid_argument("solve: right-hand side has " + std::to_string(b.rows()) +
                                " rows, system has " + std::to_string(n));
  }
  const Index nrhs = b.cols();
  const auto& H = f.data();
  const ClusterTree& tree = H.tree();
  const int L = tree.levels();
  const detail::BufferIds id{L};

  Matrix<T> x = b;
  if (nrhs == 0) return x;
  Index w_rows = 0;
  for (int l = 0; l < L; ++l) w_rows = std::max(w_rows, f.k_rows(l));
  std::vector<T> w(w_rows * nrhs);

  // The kernels take mutable spans; factor buffers are only read here.
  auto mut = [](const std::vector<T>& v) {
    return std::span<T>(const_cast<T*>(v.data()), v.size());
  };
  std::vector<std::span<T>> table(id.count());
  table[id.d()] = mut(H.d_big());
  for (int l = 1; l <= L; ++l) {
    table[id.y(l)] = mut(H.u_panel(l).data);
    table[id.v(l)] = mut(H.v_panel(l).data);
  }
  for (int l = 0; l < L; ++l) table[id.k(l)] = mut(f.k_big(l));
  table[id.work0()] = std::span<T>(x.data(), static_cast<std::size_t>(x.size()));
  table[id.work1()] = w;
  const BufferTable<T> bufs(table);
  SolveStats st;

  {
    std::vector<LuSolveItem> items;
    for (Index i = 0; i < tree.leaf_count(); ++i) {
      const IndexRange r = tree.leaves()[i];
      const BlockRef lu{id.d(), H.leaf_offset(i), r.size(), r.size(), r.size()};
      items.push_back({lu, static_cast<std::size_t>(i), {id.work0(), r.start, r.size(), nrhs, n}});
    }
    st.leaf_flops = batched_lu_solve_inplace<T>(exec, bufs, f.leaf_pivots(), items);
  }

  for (int l = L - 1; l >= 0; --l) {
    const int c = l + 1;
    const Index count = tree.node_count(l);
    const bool large = l < exec.large_gemm_levels();
    bool uni = true;
    for (const auto& r : tree.level_nodes(c)) uni = uni && r.size() == tree.node(c, 0).size();
    uni = uni && H.u_panel(c).uniform();
    const Index hw = std::max<Index>(1, f.k_rows(l));
    auto pq = [&](Index g) { return std::pair(H.u_rank(c, 2 * g), H.u_rank(c, 2 * g + 1)); };

    for (int s = 0; s < 2; ++s) {
      auto gen = [&, s](Index g) {
        const auto [p, q] = pq(g);
        const KLayout lay = f.k_layout(l, g);
        const IndexRange r = tree.node(c, 2 * g + s);
        const Index rv = s == 0 ? q : p;
        const Index row = f.k_row_offset(l, g) + (s == 0 ? lay.rhs_a : lay.rhs_b);
        return GemmItem{{id.v(c), r.start, r.size(), rv, n},
                        {id.work0(), r.start, r.size(), nrhs, n},
                        {id.work1(), row, rv, nrhs, hw}};
      };
      st.gemm_flops += detail::run_gemms<T>(exec, bufs, count, gen, large, uni, T(1), T(0),
                                            Op::conj_transpose);
    }

    std::vector<LuSolveItem> solves;
    for (Index g = 0; g < count; ++g) {
      const Index d = f.k_dim(l, g);
      if (d == 0) continue;
      const BlockRef lu{id.k(l), f.k_offset(l, g), d, d, d};
      solves.push_back({lu, static_cast<std::size_t>(g), {id.work1(), f.k_row_offset(l, g), d, nrhs, hw}});
    }
    st.k_solve_flops += batched_lu_solve_inplace<T>(exec, bufs, f.k_pivots(l), solves);

    for (int s = 0; s < 2; ++s) {
      auto gen = [&, s](Index g) {
        const auto [p, q] = pq(g);
        const KLayout lay = f.k_layout(l, g);
        const IndexRange r = tree.node(c, 2 * g + s);
        const Index ry = s == 0 ? p : q;
        const Index row = f.k_row_offset(l, g) + (s == 0 ? lay.sol_a : lay.sol_b);
        return GemmItem{{id.y(c), r.start, r.size(), ry, n},
                        {id.work1(), row, ry, nrhs, hw},
                        {id.work0(), r.start, r.size(), nrhs, n}};
      };
      st.gemm_flops += detail::run_gemms<T>(exec, bufs, count, gen, large, uni, T(-1), T(1),
                                            Op::none);
    }
    ++st.levels_visited;
  }
  if (stats != nullptr) *stats = st;
  return x;
}

namespace {

/// Adds log|det| of an LU-factored block to acc; returns false on a zero pivot.
template <class T>
bool accumulate_lu_det(const T* lu, Index d, std::span<const Index> piv, double& log_abs,
                       T& phase, bool pivot_parity) {
  for (Index k = 0; k < d; ++k) {
    const T u = lu[k + k * d];
    const real_t<T> a = std::abs(u);
    if (a == 0) return false;
    log_abs += std::log(static_cast<double>(a));
    phase *= u / a;
    if (pivot_parity && piv[k] != k) phase = -phase;
  }
  return true;
}

}  // namespace

template <Scalar T>
LogDet<T> logdet(const HodlrFactorization<T>& f) {
  const auto& H = f.data();
  const ClusterTree& tree = H.tree();
  double log_abs = 0;
  T phase = T(1);
  const LogDet<T> zero{-std::numeric_limits<double>::infinity(), T(0)};
  for (Index i = 0; i < tree.leaf_count(); ++i) {
    const Index m = tree.leaves()[i].size();
    if (!accumulate_lu_det(H.d_big().data() + H.leaf_offset(i), m,
                           f.leaf_pivots().block_pivots(i), log_abs, phase, true)) {
      return zero;
    }
  }
  for (int l = 0; l < f.levels(); ++l) {
    for (Index g = 0; g < tree.node_count(l); ++g) {
      const Index d = f.k_dim(l, g);
      if (d == 0) continue;
      if (!accumulate_lu_det(f.k_big(l).data() + f.k_offset(l, g), d,
                             f.k_pivots(l).block_pivots(g), log_abs, phase, true)) {
        return zero;
      }
      if (f.variant() == KVariant::pivoted_standard) {
        const Index p = H.u_rank(l + 1, 2 * g);
        const Index q = H.u_rank(l + 1, 2 * g + 1);
        if ((p * q) % 2 != 0) phase = -phase;
      }
    }
    if constexpr (is_complex_v<T>) phase /= std::abs(phase);
  }
  return {log_abs, phase};
}

namespace {

template <Scalar T>
double rel_norm(const Matrix<T>& r, double bnorm) {
  return static_cast<double>(r.norm()) / bnorm;
}

}  // namespace

template <Scalar T>
RefinementResult<T> solve_with_refinement(const HodlrFactorization<T>& f,
                                          const std::function<Matrix<T>(const Matrix<T>&)>& apply,
                                          const Matrix<T>& b, int max_iters, const Executor& exec) {
  RefinementResult<T> out;
  const double bnorm = static_cast<double>(b.norm());
  if (bnorm == 0) {
    out.x = Matrix<T>::Zero(b.rows(), b.cols());
    out.history.push_back(0.0);
    return out;
  }
  Matrix<T> x = solve(f, b, nullptr, exec);
  Matrix<T> r = b - apply(x);
  double best = rel_norm(r, bnorm);
  out.history.push_back(best);
  out.x = x;
  int worse = 0;
  int grew = 0;
  double prev = best;
  for (int it = 0; it < max_iters && best > 0; ++it) {
    x += solve(f, r, nullptr, exec);
    r = b - apply(x);
    const double rel = rel_norm(r, bnorm);
    out.history.push_back(rel);
    ++out.iterations;
    grew = rel > prev ? grew + 1 : 0;
    prev = rel;
    if (rel < best) {
      best = rel;
      out.x = x;
      worse = 0;
    } else if (++worse >= 2) {
      break;
    }
    if (grew >= 2) break;
  }
  out.diverged = grew >= 2;
  return out;
}

template <Scalar T>
RefinementResult<T> solve_with_refinement(const HodlrFactorization<T>& f, const HodlrMatrix<T>& h,
                                          const Matrix<T>& b, int max_iters, const Executor& exec) {
  return solve_with_refinement<T>(
      f, [&](const Matrix<T>& x) { return matvec(h, x); }, b, max_iters, exec);
}

#define HODLR_INSTANTIATE(T)                                                                     \
  template Matrix<T> solve(const HodlrFactorization<T>&, const Matrix<T>&, SolveStats*,          \
                           const Executor&);                                                     \
  template LogDet<T> logdet(const HodlrFactorization<T>&);                                       \
  template RefinementResult<T> solve_with_refinement(                                           \
      const HodlrFactorization<T>&, const std::function<Matrix<T>(const Matrix<T>&)>&,           \
      const Matrix<T>&, int, const Executor&);                                                   \
  template RefinementResult<T> solve_with_refinement(const HodlrFactorization<T>&,              \
                                                     const HodlrMatrix<T>&, const Matrix<T>&,    \
                                                     int, const Executor&);

HODLR_INSTANTIATE(float)
HODLR_INSTANTIATE(double)
HODLR_INSTANTIATE(std::complex<float>)
HODLR_INSTANTIATE(std::complex<double>)

}  // namespace hodlr
