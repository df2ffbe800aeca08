#include "hodlr/batched.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <stdexcept>
#include <string>

namespace hodlr::batched {

namespace {

std::string shape(const BlockRef& b) {
  return std::to_string(b.rows) + "x" + std::to_string(b.cols);
}

template <class T>
void check_block(BufferTable<T> buffers, const BlockRef& b, std::size_t item, const char* what,
                 const char* who) {
  auto fail = [&](const std::string& msg) {
    throw std::invalid_argument(std::string(who) + ": item " + std::to_string(item) + ": " + what +
                                " " + msg);
  };
  if (b.buffer >= buffers.size()) fail("refers to missing buffer " + std::to_string(b.buffer));
  if (b.rows < 0 || b.cols < 0 || b.offset < 0) fail("has negative offset or dimension");
  if (b.ld < std::max<Index>(1, b.rows)) fail("has leading dimension below its row count");
  const bool empty = b.rows == 0 || b.cols == 0;
  if (!empty && b.extent() > static_cast<Index>(buffers[b.buffer].size())) {
    fail("runs past the end of its buffer");
  }
}

template <class T>
void check_gemm_item(BufferTable<T> buffers, const GemmItem& it, Op op, std::size_t idx,
                     const char* who) {
  check_block(buffers, it.a, idx, "a", who);
  check_block(buffers, it.b, idx, "b", who);
  check_block(buffers, it.c, idx, "c", who);
  const Index m = op == Op::none ? it.a.rows : it.a.cols;
  const Index k = op == Op::none ? it.a.cols : it.a.rows;
  if (k != it.b.rows || m != it.c.rows || it.b.cols != it.c.cols) {
    throw std::invalid_argument(std::string(who) + ": item " + std::to_string(idx) +
                                ": shape mismatch (a " + shape(it.a) + ", b " + shape(it.b) +
                                ", c " + shape(it.c) + ")");
  }
}

bool overlaps(const BlockRef& x, const BlockRef& y) {
  if (x.buffer != y.buffer) return false;
  if (x.rows == 0 || x.cols == 0 || y.rows == 0 || y.cols == 0) return false;
  if (x.ld == y.ld) {
    const Index xr = x.offset % x.ld, xc = x.offset / x.ld;
    const Index yr = y.offset % y.ld, yc = y.offset / y.ld;
    if (xr + x.rows <= x.ld && yr + y.rows <= y.ld) {
      const bool rows_meet = xr < yr + y.rows && yr < xr + x.rows;
      const bool cols_meet = xc < yc + y.cols && yc < xc + x.cols;
      return rows_meet && cols_meet;
    }
  }
  return x.offset < y.extent() && y.offset < x.extent();
}

// Panels have leading dimension n, usually a power of two, so their columns
// collide in cache sets and alias mod 4096. Tiles are packed into contiguous
// stack buffers of at most this many bytes before the inner loops run.
constexpr std::size_t kPackBytes = 96 * 1024;

/// One GEMM over output columns [j0, j1). Every output entry is formed as
/// beta*c followed by the k products added in ascending order, so a column's
/// value does not depend on which other columns are computed alongside it.
/// Tiling and packing only move data; they never reorder the additions into
/// a single entry.
template <class T>
void gemm_columns(const T* a, Index lda, const T* b, Index ldb, T* c, Index ldc, Index m, Index k,
                  Index j0, Index j1, T alpha, T beta, Op op) {
  for (Index j = j0; j < j1; ++j) {
    T* cj = c + j * ldc;
    if (beta == T(0)) {
      std::fill(cj, cj + m, T(0));
    } else if (beta != T(1)) {
      for (Index i = 0; i < m; ++i) cj[i] *= beta;
    }
  }
  if (m == 0 || k == 0 || j0 >= j1) return;
  if (j1 - j0 <= 2) {
    // Too few columns to repay a packed copy; stream the operands directly.
    for (Index j = j0; j < j1; ++j) {
      const T* bj = b + j * ldb;
      T* cj = c + j * ldc;
      if (op == Op::none) {
        // Four products per pass over c, still added in ascending p.
        Index p = 0;
        for (; p + 4 <= k; p += 4) {
          const T t0 = alpha * bj[p], t1 = alpha * bj[p + 1];
          const T t2 = alpha * bj[p + 2], t3 = alpha * bj[p + 3];
          const T* a0 = a + p * lda;
          const T* a1 = a0 + lda;
          const T* a2 = a1 + lda;
          const T* a3 = a2 + lda;
          for (Index i = 0; i < m; ++i) {
            T v = cj[i];
            v += a0[i] * t0;
            v += a1[i] * t1;
            v += a2[i] * t2;
            v += a3[i] * t3;
            cj[i] = v;
          }
        }
        for (; p < k; ++p) {
          const T t = alpha * bj[p];
          const T* ap = a + p * lda;
          for (Index i = 0; i < m; ++i) cj[i] += ap[i] * t;
        }
      } else {
        Index i = 0;
        for (; i + 4 <= m; i += 4) {
          const T* a0 = a + i * lda;
          const T* a1 = a0 + lda;
          const T* a2 = a1 + lda;
          const T* a3 = a2 + lda;
          T s0 = cj[i], s1 = cj[i + 1], s2 = cj[i + 2], s3 = cj[i + 3];
          for (Index p = 0; p < k; ++p) {
            const T bp = bj[p];
            s0 += alpha * (conj(a0[p]) * bp);
            s1 += alpha * (conj(a1[p]) * bp);
            s2 += alpha * (conj(a2[p]) * bp);
            s3 += alpha * (conj(a3[p]) * bp);
          }
          cj[i] = s0, cj[i + 1] = s1, cj[i + 2] = s2, cj[i + 3] = s3;
        }
        for (; i < m; ++i) {
          const T* ai = a + i * lda;
          T s = cj[i];
          for (Index p = 0; p < k; ++p) s += alpha * (conj(ai[p]) * bj[p]);
          cj[i] = s;
        }
      }
    }
    return;
  }
  constexpr Index kCap = static_cast<Index>(kPackBytes / sizeof(T));
  // Raw storage: std::complex would otherwise zero the buffer on every call.
  alignas(64) unsigned char pack_bytes[kPackBytes];
  T* const pack = reinterpret_cast<T*>(pack_bytes);

  if (op == Op::none) {
    constexpr Index kRows = 128;
    constexpr Index kCols = 4;
    alignas(64) unsigned char cpack_bytes[kRows * kCols * sizeof(T)];
    T* const cpack = reinterpret_cast<T*>(cpack_bytes);
    const Index pc = std::max<Index>(1, std::min(k, (kCap - kRows) / kRows));
    for (Index i0 = 0; i0 < m; i0 += kRows) {
      const Index mi = std::min(kRows, m - i0);
      for (Index p0 = 0; p0 < k; p0 += pc) {
        const Index kp = std::min(pc, k - p0);
        for (Index p = 0; p < kp; ++p) std::copy_n(a + (p0 + p) * lda + i0, mi, pack + p * kRows);
        for (Index j = j0; j < j1; j += kCols) {
          const Index nj = std::min(kCols, j1 - j);
          for (Index t = 0; t < nj; ++t) std::copy_n(c + (j + t) * ldc + i0, mi, cpack + t * kRows);
          T* c0 = cpack;
          T* c1 = cpack + kRows;
          T* c2 = cpack + 2 * kRows;
          T* c3 = cpack + 3 * kRows;
          const T* bj = b + j * ldb + p0;
          if (nj == kCols) {
            for (Index p = 0; p < kp; ++p) {
              const T t0 = alpha * bj[p];
              const T t1 = alpha * bj[p + ldb];
              const T t2 = alpha * bj[p + 2 * ldb];
              const T t3 = alpha * bj[p + 3 * ldb];
              const T* ap = pack + p * kRows;
              for (Index i = 0; i < mi; ++i) {
                const T x = ap[i];
                c0[i] += x * t0;
                c1[i] += x * t1;
                c2[i] += x * t2;
                c3[i] += x * t3;
              }
            }
          } else {
            for (Index t = 0; t < nj; ++t) {
              T* ct = cpack + t * kRows;
              for (Index p = 0; p < kp; ++p) {
                const T s = alpha * bj[p + t * ldb];
                const T* ap = pack + p * kRows;
                for (Index i = 0; i < mi; ++i) ct[i] += ap[i] * s;
              }
            }
          }
          for (Index t = 0; t < nj; ++t) std::copy_n(cpack + t * kRows, mi, c + (j + t) * ldc + i0);
        }
      }
    }
    return;
  }

  // a is k x m; c(i, j) += alpha * conj(a(p, i)) * b(p, j). Partial sums go
  // back to c between k chunks, which keeps the ascending-p order.
  constexpr Index kBlockCols = 64;
  for (Index i0 = 0; i0 < m; i0 += kBlockCols) {
    const Index mi = std::min(kBlockCols, m - i0);
    const Index pc = std::max<Index>(1, std::min(k, kCap / mi));
    for (Index p0 = 0; p0 < k; p0 += pc) {
      const Index kp = std::min(pc, k - p0);
      for (Index i = 0; i < mi; ++i) {
        const T* src = a + (i0 + i) * lda + p0;
        T* dst = pack + i * kp;
        for (Index p = 0; p < kp; ++p) dst[p] = conj(src[p]);
      }
      Index j = j0;
      for (; j + 2 <= j1; j += 2) {
        const T* b0 = b + j * ldb + p0;
        const T* b1 = b0 + ldb;
        T* c0 = c + j * ldc + i0;
        T* c1 = c0 + ldc;
        Index i = 0;
        for (; i + 4 <= mi; i += 4) {
          const T* a0 = pack + i * kp;
          const T* a1 = a0 + kp;
          const T* a2 = a1 + kp;
          const T* a3 = a2 + kp;
          T s00 = c0[i], s10 = c0[i + 1], s20 = c0[i + 2], s30 = c0[i + 3];
          T s01 = c1[i], s11 = c1[i + 1], s21 = c1[i + 2], s31 = c1[i + 3];
          for (Index p = 0; p < kp; ++p) {
            const T u = b0[p], v = b1[p];
            s00 += alpha * (a0[p] * u);
            s10 += alpha * (a1[p] * u);
            s20 += alpha * (a2[p] * u);
            s30 += alpha * (a3[p] * u);
            s01 += alpha * (a0[p] * v);
            s11 += alpha * (a1[p] * v);
            s21 += alpha * (a2[p] * v);
            s31 += alpha * (a3[p] * v);
          }
          c0[i] = s00, c0[i + 1] = s10, c0[i + 2] = s20, c0[i + 3] = s30;
          c1[i] = s01, c1[i + 1] = s11, c1[i + 2] = s21, c1[i + 3] = s31;
        }
        for (; i < mi; ++i) {
          const T* ai = pack + i * kp;
          T s0 = c0[i], s1 = c1[i];
          for (Index p = 0; p < kp; ++p) {
            s0 += alpha * (ai[p] * b0[p]);
            s1 += alpha * (ai[p] * b1[p]);
          }
          c0[i] = s0;
          c1[i] = s1;
        }
      }
      for (; j < j1; ++j) {
        const T* bj = b + j * ldb + p0;
        T* cj = c + j * ldc + i0;
        for (Index i = 0; i < mi; ++i) {
          const T* ai = pack + i * kp;
          T s = cj[i];
          for (Index p = 0; p < kp; ++p) s += alpha * (ai[p] * bj[p]);
          cj[i] = s;
        }
      }
    }
  }
}

template <class T>
void run_item(BufferTable<T> buffers, const GemmItem& it, T alpha, T beta, Op op, Index j0, Index j1) {
  const Index m = it.c.rows;
  const Index k = op == Op::none ? it.a.cols : it.a.rows;
  gemm_columns(buffers[it.a.buffer].data() + it.a.offset, it.a.ld,
               buffers[it.b.buffer].data() + it.b.offset, it.b.ld,
               buffers[it.c.buffer].data() + it.c.offset, it.c.ld, m, k, j0, j1, alpha, beta, op);
}

FlopCount gemm_flops(const GemmItem& it, Op op) {
  const Index k = op == Op::none ? it.a.cols : it.a.rows;
  return 2 * static_cast<FlopCount>(it.c.rows) * static_cast<FlopCount>(it.c.cols) *
         static_cast<FlopCount>(k);
}

}  // namespace

template <class T>
void validate_gemm(BufferTable<T> buffers, std::span<const GemmItem> items, Op op_a,
                   bool check_disjoint) {
  for (std::size_t i = 0; i < items.size(); ++i) {
    check_gemm_item(buffers, items[i], op_a, i, "batched_gemm");
  }
  if (!check_disjoint) return;
  for (std::size_t i = 0; i < items.size(); ++i) {
    for (std::size_t j = i + 1; j < items.size(); ++j) {
      if (overlaps(items[i].c, items[j].c)) {
        throw std::invalid_argument("batched_gemm: item " + std::to_string(j) +
                                    ": output overlaps item " + std::to_string(i));
      }
    }
  }
}

template <class T>
FlopCount batched_gemm(const Executor& exec, BufferTable<T> buffers, std::span<const GemmItem> items,
                       T alpha, T beta, Op op_a) {
  validate_gemm(buffers, items, op_a, false);
  exec.parallel_for(static_cast<Index>(items.size()), [&](Index i) {
    const auto& it = items[i];
    run_item(buffers, it, alpha, beta, op_a, 0, it.c.cols);
  });
  FlopCount f = 0;
  for (const auto& it : items) f += gemm_flops(it, op_a);
  return f;
}

template <class T>
FlopCount strided_batched_gemm(const Executor& exec, BufferTable<T> buffers,
                               const StridedGemm& batch, T alpha, T beta, Op op_a) {
  if (batch.count < 0) throw std::invalid_argument("strided_batched_gemm: negative count");
  if (batch.count == 0) return 0;
  check_gemm_item(buffers, batch.first, op_a, 0, "strided_batched_gemm");
  const Index last = batch.count - 1;
  check_gemm_item(buffers, batch.item(last), op_a, static_cast<std::size_t>(last),
                  "strided_batched_gemm");
  exec.parallel_for(batch.count, [&](Index k) {
    const GemmItem it = batch.item(k);
    run_item(buffers, it, alpha, beta, op_a, 0, it.c.cols);
  });
  return gemm_flops(batch.first, op_a) * static_cast<FlopCount>(batch.count);
}

template <class T>
FlopCount grouped_gemm_large(const Executor& exec, BufferTable<T> buffers,
                             std::span<const GemmItem> items, T alpha, T beta, Op op_a) {
  validate_gemm(buffers, items, op_a, false);
  FlopCount f = 0;
  if (!exec.inner_parallel() || exec.thread_count() <= 1) {
    exec.parallel_for(static_cast<Index>(items.size()), [&](Index i) {
      run_item(buffers, items[i], alpha, beta, op_a, 0, items[i].c.cols);
    });
  } else {
    // Fixed column chunks per item; each column keeps its serial arithmetic.
    const Index chunks = exec.thread_count();
    for (const auto& it : items) {
      const Index cols = it.c.cols;
      const Index width = (cols + chunks - 1) / std::max<Index>(chunks, 1);
      if (width == 0) continue;
      const Index pieces = (cols + width - 1) / width;
      exec.parallel_for(pieces, [&](Index p) {
        run_item(buffers, it, alpha, beta, op_a, p * width, std::min(cols, (p + 1) * width));
      });
    }
  }
  for (const auto& it : items) f += gemm_flops(it, op_a);
  return f;
}

FlopCount lu_factor_flops(Index dim) {
  FlopCount f = 0;
  for (Index k = 0; k < dim; ++k) {
    const auto t = static_cast<FlopCount>(dim - k - 1);
    f += t + 2 * t * t;
  }
  return f;
}

FlopCount lu_solve_flops(Index dim, Index nrhs) {
  return 2 * static_cast<FlopCount>(dim) * static_cast<FlopCount>(dim) *
         static_cast<FlopCount>(nrhs);
}

template <class T>
PivotTable batched_lu_factor_inplace(const Executor& exec, BufferTable<T> buffers,
                                     std::span<const BlockRef> blocks, Pivoting pivoting,
                                     FlopCount* flops) {
  using R = real_t<T>;
  PivotTable table;
  const std::size_t nb = blocks.size();
  table.offsets.resize(nb);
  table.dims.resize(nb);
  table.status.assign(nb, BlockStatus::ok);
  Index total = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    check_block(buffers, blocks[b], b, "block", "batched_lu_factor_inplace");
    if (blocks[b].rows != blocks[b].cols) {
      throw std::invalid_argument("batched_lu_factor_inplace: item " + std::to_string(b) +
                                  ": block is not square (" + shape(blocks[b]) + ")");
    }
    table.offsets[b] = total;
    table.dims[b] = blocks[b].rows;
    total += blocks[b].rows;
  }
  table.pivots.resize(total);

  exec.parallel_for(static_cast<Index>(nb), [&](Index b) {
    const BlockRef& blk = blocks[b];
    T* a = buffers[blk.buffer].data() + blk.offset;
    const Index n = blk.rows;
    const Index ld = blk.ld;
    Index* piv = table.pivots.data() + table.offsets[b];
    const R eps = std::numeric_limits<R>::epsilon();
    BlockStatus st = BlockStatus::ok;
    for (Index k = 0; k < n; ++k) {
      T* ak = a + k * ld;
      Index p = k;
      if (pivoting == Pivoting::partial) {
        R best = std::abs(ak[k]);
        for (Index i = k + 1; i < n; ++i) {
          const R v = std::abs(ak[i]);
          if (v > best) {
            best = v;
            p = i;
          }
        }
      }
      piv[k] = p;
      R colmax = 0;
      for (Index i = 0; i < n; ++i) colmax = std::max(colmax, R(std::abs(ak[i])));
      if (ak[p] == T(0)) {
        st = BlockStatus::singular;
        continue;
      }
      if (std::abs(ak[p]) < eps * static_cast<R>(n) * colmax && st == BlockStatus::ok) {
        st = BlockStatus::near_singular;
      }
      if (p != k) {
        for (Index j = 0; j < n; ++j) std::swap(a[k + j * ld], a[p + j * ld]);
      }
      const T d = ak[k];
      for (Index i = k + 1; i < n; ++i) ak[i] /= d;
      for (Index j = k + 1; j < n; ++j) {
        T* aj = a + j * ld;
        const T t = aj[k];
        for (Index i = k + 1; i < n; ++i) aj[i] -= ak[i] * t;
      }
    }
    table.status[b] = st;
  });
  if (flops != nullptr) {
    for (std::size_t b = 0; b < nb; ++b) *flops += lu_factor_flops(table.dims[b]);
  }
  return table;
}

template <class T>
FlopCount batched_lu_solve_inplace(const Executor& exec, BufferTable<T> buffers,
                                   const PivotTable& table, std::span<const LuSolveItem> items) {
  FlopCount f = 0;
  for (std::size_t i = 0; i < items.size(); ++i) {
    const auto& it = items[i];
    check_block(buffers, it.lu, i, "lu", "batched_lu_solve_inplace");
    check_block(buffers, it.rhs, i, "rhs", "batched_lu_solve_inplace");
    if (it.block >= table.size()) {
      throw std::invalid_argument("batched_lu_solve_inplace: item " + std::to_string(i) +
                                  ": no pivot entry " + std::to_string(it.block));
    }
    const Index n = table.dims[it.block];
    if (it.lu.rows != n || it.lu.cols != n || it.rhs.rows != n) {
      throw std::invalid_argument("batched_lu_solve_inplace: item " + std::to_string(i) +
                                  ": shape mismatch (lu " + shape(it.lu) + ", rhs " +
                                  shape(it.rhs) + ")");
    }
    if (table.status[it.block] == BlockStatus::singular) {
      throw SingularBlockError("LU solve with singular block " + std::to_string(it.block), -1,
                               static_cast<Index>(it.block));
    }
    f += lu_solve_flops(n, it.rhs.cols);
  }
  exec.parallel_for(static_cast<Index>(items.size()), [&](Index i) {
    const auto& it = items[i];
    const T* lu = buffers[it.lu.buffer].data() + it.lu.offset;
    const Index ldl = it.lu.ld;
    T* x = buffers[it.rhs.buffer].data() + it.rhs.offset;
    const Index n = it.lu.rows;
    const auto piv = table.block_pivots(it.block);
    for (Index j = 0; j < it.rhs.cols; ++j) {
      T* xj = x + j * it.rhs.ld;
      for (Index k = 0; k < n; ++k) {
        if (piv[k] != k) std::swap(xj[k], xj[piv[k]]);
      }
      for (Index k = 0; k < n; ++k) {
        const T t = xj[k];
        const T* lk = lu + k * ldl;
        for (Index r = k + 1; r < n; ++r) xj[r] -= lk[r] * t;
      }
      for (Index k = n - 1; k >= 0; --k) {
        const T* uk = lu + k * ldl;
        xj[k] /= uk[k];
        const T t = xj[k];
        for (Index r = 0; r < k; ++r) xj[r] -= uk[r] * t;
      }
    }
  });
  return f;
}

#define HODLR_INSTANTIATE(T)                                                                     \
  template void validate_gemm<T>(BufferTable<T>, std::span<const GemmItem>, Op, bool);            \
  template FlopCount batched_gemm<T>(const Executor&, BufferTable<T>, std::span<const GemmItem>,  \
                                     T, T, Op);                                                   \
  template FlopCount strided_batched_gemm<T>(const Executor&, BufferTable<T>, const StridedGemm&, \
                                             T, T, Op);                                           \
  template FlopCount grouped_gemm_large<T>(const Executor&, BufferTable<T>,                       \
                                           std::span<const GemmItem>, T, T, Op);                  \
  template PivotTable batched_lu_factor_inplace<T>(const Executor&, BufferTable<T>,               \
                                                   std::span<const BlockRef>, Pivoting,           \
                                                   FlopCount*);                                   \
  template FlopCount batched_lu_solve_inplace<T>(const Executor&, BufferTable<T>,                 \
                                                 const PivotTable&, std::span<const LuSolveItem>);

HODLR_INSTANTIATE(float)
HODLR_INSTANTIATE(double)
HODLR_INSTANTIATE(std::complex<float>)
HODLR_INSTANTIATE(std::complex<double>)

}  // namespace hodlr::batched
