#include "hodlr/factorization.hpp"

#include <algorithm>
#include <numeric>
#include <stdexcept>

#include "dispatch.hpp"

namespace hodlr {

KVariant parse_k_variant(const std::string& s) {
  if (s == "pivoted_standard" || s == "standard") return KVariant::pivoted_standard;
  if (s == "permuted_rhs") return KVariant::permuted_rhs;
  if (s == "permuted_solution") return KVariant::permuted_solution;
  throw std::invalid_argument("unknown k_variant '" + s + "'");
}

std::string to_string(KVariant v) {
  switch (v) {
    case KVariant::pivoted_standard: return "pivoted_standard";
    case KVariant::permuted_rhs: return "permuted_rhs";
    case KVariant::permuted_solution: return "permuted_solution";
  }
  return "unknown";
}

KLayout KLayout::of(KVariant v, Index p, Index q) {
  switch (v) {
    case KVariant::pivoted_standard: return {0, q, 0, p};
    case KVariant::permuted_rhs: return {p, 0, 0, p};
    case KVariant::permuted_solution: return {0, q, q, 0};
  }
  throw std::logic_error("KLayout: unknown variant");
}

std::uint64_t FactorFlops::total() const {
  std::uint64_t s = leaf_lu + leaf_solve;
  for (const auto* v : {&t_gemm, &w_gemm, &y_update, &k_lu, &w_solve}) {
    s = std::accumulate(v->begin(), v->end(), s);
  }
  return s;
}

namespace {

constexpr Index kGroupRows = 4096;

/// Writes the (p+q)^2 coupling block into out (leading dimension ld).
template <class T>
void form_k_into(T* out, Index ld, const T* ta, Index ld_ta, const T* tb, Index ld_tb, Index p,
                 Index q, KVariant v) {
  const Index d = p + q;
  for (Index j = 0; j < d; ++j) std::fill(out + j * ld, out + j * ld + d, T(0));
  auto copy = [&](Index r0, Index c0, const T* src, Index rows, Index cols, Index lds) {
    for (Index j = 0; j < cols; ++j)
      for (Index i = 0; i < rows; ++i) out[(r0 + i) + (c0 + j) * ld] = src[i + j * lds];
  };
  auto eye = [&](Index r0, Index c0, Index size) {
    for (Index i = 0; i < size; ++i) out[(r0 + i) + (c0 + i) * ld] = T(1);
  };
  switch (v) {
    case KVariant::pivoted_standard:
      copy(0, 0, ta, q, p, ld_ta);
      eye(0, p, q);
      eye(q, 0, p);
      copy(q, p, tb, p, q, ld_tb);
      break;
    case KVariant::permuted_rhs:
      eye(0, 0, p);
      copy(0, p, tb, p, q, ld_tb);
      copy(p, 0, ta, q, p, ld_ta);
      eye(p, p, q);
      break;
    case KVariant::permuted_solution:
      eye(0, 0, q);
      copy(0, q, ta, q, p, ld_ta);
      copy(q, 0, tb, p, q, ld_tb);
      eye(q, q, p);
      break;
  }
}

template <class T>
bool level_uniform(const HodlrMatrix<T>& h, int level) {
  const auto nodes = h.tree().level_nodes(level);
  for (const auto& r : nodes) {
    if (r.size() != nodes[0].size()) return false;
  }
  return h.u_panel(level).uniform();
}

}  // namespace

template <Scalar T>
Matrix<T> form_k_block(const Matrix<T>& t_a, const Matrix<T>& t_b, KVariant variant) {
  const Index q = t_a.rows();
  const Index p = t_a.cols();
  if (t_b.rows() != p || t_b.cols() != q) {
    throw std::invalid_argument("form_k_block: sibling ranks disagree (t_a is " +
                                std::to_string(q) + "x" + std::to_string(p) + ", t_b is " +
                                std::to_string(t_b.rows()) + "x" + std::to_string(t_b.cols()) + ")");
  }
  Matrix<T> k(p + q, p + q);
  form_k_into(k.data(), std::max<Index>(1, p + q), t_a.data(), std::max<Index>(1, q), t_b.data(),
              std::max<Index>(1, p), p, q, variant);
  return k;
}

template <Scalar T>
Index HodlrFactorization<T>::k_dim(int level, Index node) const {
  return h_.u_rank(level + 1, 2 * node) + h_.u_rank(level + 1, 2 * node + 1);
}

template <Scalar T>
KLayout HodlrFactorization<T>::k_layout(int level, Index node) const {
  return KLayout::of(variant_, h_.u_rank(level + 1, 2 * node), h_.u_rank(level + 1, 2 * node + 1));
}

template <Scalar T>
Matrix<T> HodlrFactorization<T>::k_lu(int level, Index node) const {
  const Index d = k_dim(level, node);
  return ConstMatrixMap<T>(k_big_.at(level).data() + k_offset(level, node), d, d,
                           Eigen::OuterStride<>(std::max<Index>(1, d)));
}

template <Scalar T>
std::uint64_t HodlrFactorization<T>::k_scalars() const {
  std::uint64_t s = 0;
  for (const auto& k : k_big_) s += k.size();
  return s;
}

template <Scalar U>
HodlrFactorization<U> factorize(HodlrMatrix<U>&& h, const FactorOptions& options,
                                const Executor& exec) {
  using T = U;
  using namespace batched;
  HodlrFactorization<T> f;
  f.h_ = std::move(h);
  f.variant_ = options.variant;
  auto& H = f.h_;
  const ClusterTree& tree = H.tree();
  const int L = tree.levels();
  const Index n = tree.size();
  const detail::BufferIds id{L};

  // Coupling-block and workspace layout per parent level.
  f.k_big_.resize(L);
  f.k_offsets_.resize(L);
  f.k_row_offsets_.resize(L);
  f.k_rows_.assign(L, 0);
  std::vector<std::vector<Index>> t_offsets(L);
  std::vector<Index> w_cols(L, 0);
  Index t_size = 0;
  Index w_size = 0;
  for (int l = 0; l < L; ++l) {
    const int c = l + 1;
    Index koff = 0, roff = 0, toff = 0;
    for (Index g = 0; g < tree.node_count(l); ++g) {
      const Index p = H.u_rank(c, 2 * g);
      const Index q = H.u_rank(c, 2 * g + 1);
      f.k_offsets_[l].push_back(koff);
      f.k_row_offsets_[l].push_back(roff);
      t_offsets[l].push_back(toff);
      koff += (p + q) * (p + q);
      roff += p + q;
      toff += 2 * p * q;
      Index coarse = 0;
      for (int k = 1; k <= l; ++k) coarse += H.u_rank(k, ClusterTree::ancestor(g, l, k));
      w_cols[l] = std::max(w_cols[l], coarse);
    }
    f.k_rows_[l] = roff;
    f.k_big_[l].assign(koff, T(0));
    t_size = std::max(t_size, toff);
    w_size = std::max(w_size, roff * w_cols[l]);
  }
  std::vector<T> tbuf(t_size);
  std::vector<T> wbuf(w_size);
  f.workspace_scalars_ = static_cast<std::uint64_t>(t_size + w_size);

  std::vector<std::span<T>> table(id.count());
  table[id.d()] = H.d_big();
  for (int l = 1; l <= L; ++l) {
    table[id.y(l)] = H.u_panel(l).data;
    table[id.v(l)] = H.v_panel(l).data;
  }
  for (int l = 0; l < L; ++l) table[id.k(l)] = f.k_big_[l];
  table[id.work0()] = tbuf;
  table[id.work1()] = wbuf;
  const BufferTable<T> bufs(table);

  auto& fl = f.flops_;
  fl.t_gemm.assign(L, 0);
  fl.w_gemm.assign(L, 0);
  fl.y_update.assign(L, 0);
  fl.k_lu.assign(L, 0);
  fl.w_solve.assign(L, 0);

  // Leaf blocks: LU, then D^{-1} applied to every panel's rows.
  {
    std::vector<BlockRef> blocks;
    for (Index i = 0; i < tree.leaf_count(); ++i) {
      const Index m = tree.leaves()[i].size();
      blocks.push_back({id.d(), H.leaf_offset(i), m, m, m});
    }
    f.leaf_pivots_ = batched_lu_factor_inplace<T>(exec, bufs, blocks, Pivoting::partial, &fl.leaf_lu);
    for (Index i = 0; i < tree.leaf_count(); ++i) {
      if (f.leaf_pivots_.status[i] == BlockStatus::singular) {
        throw SingularBlockError("singular diagonal block at leaf " + std::to_string(i), L, i);
      }
      if (f.leaf_pivots_.status[i] == BlockStatus::near_singular) f.near_singular_.push_back({L, i});
    }
    std::vector<LuSolveItem> items;
    for (Index i = 0; i < tree.leaf_count(); ++i) {
      const IndexRange r = tree.leaves()[i];
      for (int k = 1; k <= L; ++k) {
        const Index rk = H.u_rank(k, ClusterTree::ancestor(i, L, k));
        if (rk == 0) continue;
        items.push_back({blocks[i], static_cast<std::size_t>(i), {id.y(k), r.start, r.size(), rk, n}});
      }
    }
    fl.leaf_solve = batched_lu_solve_inplace<T>(exec, bufs, f.leaf_pivots_, items);
  }

  f.k_pivots_.resize(L);
  const Pivoting k_pivoting =
      options.variant == KVariant::pivoted_standard ? Pivoting::partial : Pivoting::none;

  for (int l = L - 1; l >= 0; --l) {
    const int c = l + 1;
    const Index count = tree.node_count(l);
    const bool large = l < exec.large_gemm_levels();
    const bool uni_c = options.strided_fast_path && level_uniform(H, c);
    const Index hw = std::max<Index>(1, f.k_rows_[l]);
    const auto& koffs = f.k_offsets_[l];
    const auto& roffs = f.k_row_offsets_[l];
    const auto& toffs = t_offsets[l];
    auto pq = [&](Index g) { return std::pair(H.u_rank(c, 2 * g), H.u_rank(c, 2 * g + 1)); };

    // Nodes are processed in groups of about kGroupRows rows so that every
    // panel GEMM touching a group runs while its rows are still in cache.
    // Items are unchanged; only the order in which batches are issued is.
    const Index node_rows = tree.node(l, 0).size();
    const Index group = large ? count : std::max<Index>(1, kGroupRows / std::max<Index>(1, node_rows));

    // Column offset of panel k's block inside node g's W rows.
    auto coarse_offset = [&](Index g, int k) {
      Index off = 0;
      for (int j = 1; j < k; ++j) off += H.u_rank(j, ClusterTree::ancestor(g, l, j));
      return off;
    };

    for (Index g0 = 0; g0 < count; g0 += group) {
      const Index gn = std::min(group, count - g0);
      // T_a = V_a^H Y_a (q x p) and T_b = V_b^H Y_b (p x q).
      for (int s = 0; s < 2; ++s) {
        auto gen = [&, s, g0](Index gi) {
          const Index g = g0 + gi;
          const auto [p, q] = pq(g);
          const Index node = 2 * g + s;
          const IndexRange r = tree.node(c, node);
          const Index rv = s == 0 ? q : p;
          const Index ry = s == 0 ? p : q;
          const Index off = toffs[g] + (s == 0 ? 0 : q * p);
          return GemmItem{{id.v(c), r.start, r.size(), rv, n},
                          {id.y(c), r.start, r.size(), ry, n},
                          {id.work0(), off, rv, ry, std::max<Index>(1, rv)}};
        };
        fl.t_gemm[l] += detail::run_gemms<T>(exec, bufs, gn, gen, large, uni_c, T(1), T(0),
                                             Op::conj_transpose);
      }

      // W = [V_a^H Y_k(I_a); V_b^H Y_k(I_b)] for every coarser panel k.
      for (int k = 1; k <= l; ++k) {
        const bool uni = uni_c && H.u_panel(k).uniform();
        for (int s = 0; s < 2; ++s) {
          auto gen = [&, s, k, g0](Index gi) {
            const Index g = g0 + gi;
            const auto [p, q] = pq(g);
            const KLayout lay = KLayout::of(options.variant, p, q);
            const IndexRange r = tree.node(c, 2 * g + s);
            const Index rk = H.u_rank(k, ClusterTree::ancestor(g, l, k));
            const Index rv = s == 0 ? q : p;
            const Index row = roffs[g] + (s == 0 ? lay.rhs_a : lay.rhs_b);
            return GemmItem{{id.v(c), r.start, r.size(), rv, n},
                            {id.y(k), r.start, r.size(), rk, n},
                            {id.work1(), row + coarse_offset(g, k) * hw, rv, rk, hw}};
          };
          fl.w_gemm[l] += detail::run_gemms<T>(exec, bufs, gn, gen, large, uni, T(1), T(0),
                                               Op::conj_transpose);
        }
      }
    }

    exec.parallel_for(count, [&](Index g) {
      const auto [p, q] = pq(g);
      const Index d = p + q;
      form_k_into(f.k_big_[l].data() + koffs[g], std::max<Index>(1, d), tbuf.data() + toffs[g],
                  std::max<Index>(1, q), tbuf.data() + toffs[g] + q * p, std::max<Index>(1, p), p,
                  q, options.variant);
    });

    std::vector<BlockRef> kblocks;
    kblocks.reserve(count);
    for (Index g = 0; g < count; ++g) {
      const auto [p, q] = pq(g);
      const Index d = p + q;
      kblocks.push_back({id.k(l), koffs[g], d, d, std::max<Index>(1, d)});
    }
    f.k_pivots_[l] = batched_lu_factor_inplace<T>(exec, bufs, kblocks, k_pivoting, &fl.k_lu[l]);
    for (Index g = 0; g < count; ++g) {
      if (f.k_pivots_[l].status[g] == BlockStatus::singular) {
        throw SingularBlockError("singular coupling block at level " + std::to_string(l) +
                                     ", node " + std::to_string(g),
                                 l, g);
      }
      if (f.k_pivots_[l].status[g] == BlockStatus::near_singular) f.near_singular_.push_back({l, g});
    }
    if (l == 0) continue;

    std::vector<LuSolveItem> solves;
    for (Index g = 0; g < count; ++g) {
      const Index d = kblocks[g].rows;
      const Index cols = coarse_offset(g, l + 1);
      if (d == 0 || cols == 0) continue;
      solves.push_back({kblocks[g], static_cast<std::size_t>(g), {id.work1(), roffs[g], d, cols, hw}});
    }
    fl.w_solve[l] = batched_lu_solve_inplace<T>(exec, bufs, f.k_pivots_[l], solves);

    // Y_k(I_g) -= [Y_a W_a; Y_b W_b].
    for (Index g0 = 0; g0 < count; g0 += group) {
      const Index gn = std::min(group, count - g0);
      for (int k = 1; k <= l; ++k) {
        const bool uni = uni_c && H.u_panel(k).uniform();
        for (int s = 0; s < 2; ++s) {
          auto gen = [&, s, k, g0](Index gi) {
            const Index g = g0 + gi;
            const auto [p, q] = pq(g);
            const KLayout lay = KLayout::of(options.variant, p, q);
            const IndexRange r = tree.node(c, 2 * g + s);
            const Index rk = H.u_rank(k, ClusterTree::ancestor(g, l, k));
            const Index ry = s == 0 ? p : q;
            const Index row = roffs[g] + (s == 0 ? lay.sol_a : lay.sol_b);
            return GemmItem{{id.y(c), r.start, r.size(), ry, n},
                            {id.work1(), row + coarse_offset(g, k) * hw, ry, rk, hw},
                            {id.y(k), r.start, r.size(), rk, n}};
          };
          fl.y_update[l] += detail::run_gemms<T>(exec, bufs, gn, gen, large, uni, T(-1), T(1),
                                                 Op::none);
        }
      }
    }
  }
  return f;
}

#define HODLR_INSTANTIATE(T)                                                                   \
  template Matrix<T> form_k_block(const Matrix<T>&, const Matrix<T>&, KVariant);               \
  template class HodlrFactorization<T>;                                                        \
  template HodlrFactorization<T> factorize(HodlrMatrix<T>&&, const FactorOptions&,             \
                                           const Executor&);

HODLR_INSTANTIATE(float)
HODLR_INSTANTIATE(double)
HODLR_INSTANTIATE(std::complex<float>)
HODLR_INSTANTIATE(std::complex<double>)

}  // namespace hodlr
