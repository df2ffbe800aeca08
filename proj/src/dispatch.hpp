#pragma once

// Shared by factorization and solve: buffer numbering and GEMM dispatch.

#include <vector>

#include "hodlr/batched.hpp"

namespace hodlr::detail {

/// Buffer ids in the table handed to the batched kernels: leaf blocks, Y (or
/// U) panels 1..L, V panels 1..L, coupling blocks per parent level 0..L-1,
/// then two workspaces.
struct BufferIds {
  int levels;
  std::uint32_t d() const { return 0; }
  std::uint32_t y(int l) const { return static_cast<std::uint32_t>(l); }
  std::uint32_t v(int l) const { return static_cast<std::uint32_t>(levels + l); }
  std::uint32_t k(int l) const { return static_cast<std::uint32_t>(2 * levels + 1 + l); }
  std::uint32_t work0() const { return static_cast<std::uint32_t>(3 * levels + 1); }
  std::uint32_t work1() const { return static_cast<std::uint32_t>(3 * levels + 2); }
  std::size_t count() const { return static_cast<std::size_t>(3 * levels + 3); }
};

inline bool same_shape(const batched::BlockRef& x, const batched::BlockRef& y) {
  return x.buffer == y.buffer && x.rows == y.rows && x.cols == y.cols && x.ld == y.ld;
}

inline bool same_item(const batched::GemmItem& x, const batched::GemmItem& y) {
  return same_shape(x.a, y.a) && same_shape(x.b, y.b) && same_shape(x.c, y.c) &&
         x.a.offset == y.a.offset && x.b.offset == y.b.offset && x.c.offset == y.c.offset;
}

/// Runs gen(0..count-1) as one batch. Levels flagged `large` go through the
/// independent-GEMM route; `uniform` levels try the constant-stride route,
/// falling back to an explicit item list if the stride does not hold.
template <class T, class Gen>
batched::FlopCount run_gemms(const Executor& exec, batched::BufferTable<T> bufs, Index count,
                             Gen&& gen, bool large, bool uniform, T alpha, T beta, batched::Op op) {
  using namespace batched;
  if (count <= 0) return 0;
  if (!large && uniform && count >= 2) {
    const GemmItem i0 = gen(0);
    const GemmItem i1 = gen(1);
    if (same_shape(i0.a, i1.a) && same_shape(i0.b, i1.b) && same_shape(i0.c, i1.c)) {
      StridedGemm s{i0, i1.a.offset - i0.a.offset, i1.b.offset - i0.b.offset,
                    i1.c.offset - i0.c.offset, count};
      if (same_item(s.item(count - 1), gen(count - 1))) {
        return strided_batched_gemm<T>(exec, bufs, s, alpha, beta, op);
      }
    }
  }
  std::vector<GemmItem> items;
  items.reserve(count);
  for (Index g = 0; g < count; ++g) items.push_back(gen(g));
  return large ? grouped_gemm_large<T>(exec, bufs, items, alpha, beta, op)
               : batched_gemm<T>(exec, bufs, items, alpha, beta, op);
}

}  // namespace hodlr::detail
