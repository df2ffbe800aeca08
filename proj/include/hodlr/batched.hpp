#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "hodlr/executor.hpp"
#include "hodlr/types.hpp"

namespace hodlr::batched {

/// Column-major sub-block of one buffer in a buffer table.
struct BlockRef {
  std::uint32_t buffer = 0;
  Index offset = 0;
  Index rows = 0;
  Index cols = 0;
  Index ld = 1;

  /// One past the last scalar touched; offset for an empty block.
  Index extent() const { return rows == 0 || cols == 0 ? offset : offset + (cols - 1) * ld + rows; }
};

/// Buffers addressed by BlockRef::buffer.
template <class T>
using BufferTable = std::span<const std::span<T>>;

enum class Op { none, conj_transpose };

/// c <- alpha * op(a) * b + beta * c
struct GemmItem {
  BlockRef a;
  BlockRef b;
  BlockRef c;
};

/// `count` GEMMs whose operands sit at a constant stride from the first
/// item's blocks; all items share the first item's shapes and leading
/// dimensions.
struct StridedGemm {
  GemmItem first;
  Index stride_a = 0;
  Index stride_b = 0;
  Index stride_c = 0;
  Index count = 0;

  GemmItem item(Index k) const {
    GemmItem it = first;
    it.a.offset += k * stride_a;
    it.b.offset += k * stride_b;
    it.c.offset += k * stride_c;
    return it;
  }
};

/// Multiply-add counts with the 2*m*n*k convention.
using FlopCount = std::uint64_t;

/// Throws std::invalid_argument naming the item index on shape or bounds
/// errors; with `check_disjoint`, also when two output blocks overlap.
template <class T>
void validate_gemm(BufferTable<T> buffers, std::span<const GemmItem> items, Op op_a,
                   bool check_disjoint = true);

template <class T>
FlopCount batched_gemm(const Executor& exec, BufferTable<T> buffers, std::span<const GemmItem> items,
                       T alpha, T beta, Op op_a = Op::none);

template <class T>
FlopCount strided_batched_gemm(const Executor& exec, BufferTable<T> buffers,
                               const StridedGemm& batch, T alpha, T beta, Op op_a = Op::none);

/// Few large independent GEMMs. With exec.inner_parallel(), each item's
/// output columns are split across threads; every output column still uses
/// the same arithmetic sequence, so results match batched_gemm bit for bit.
template <class T>
FlopCount grouped_gemm_large(const Executor& exec, BufferTable<T> buffers,
                             std::span<const GemmItem> items, T alpha, T beta, Op op_a = Op::none);

enum class Pivoting { partial, none };

enum class BlockStatus : std::uint8_t {
  ok = 0,
  /// Some |pivot| < eps * dim * max|column| at its elimination step.
  near_singular = 1,
  /// A pivot column was exactly zero.
  singular = 2,
};

/// Row-pivot vectors and health flags of a batch of LU factorizations.
struct PivotTable {
  /// pivots[offsets[b] + k] is the row swapped with row k at step k of block
  /// b (getrf convention, 0-based).
  std::vector<Index> pivots;
  std::vector<Index> offsets;
  std::vector<Index> dims;
  std::vector<BlockStatus> status;

  std::span<const Index> block_pivots(std::size_t b) const {
    return std::span<const Index>(pivots).subspan(offsets[b], dims[b]);
  }
  std::size_t size() const { return dims.size(); }
};

/// In-place LU of square blocks: each block holds unit-lower L below the
/// diagonal and U on and above it.
template <class T>
PivotTable batched_lu_factor_inplace(const Executor& exec, BufferTable<T> buffers,
                                     std::span<const BlockRef> blocks,
                                     Pivoting pivoting = Pivoting::partial,
                                     FlopCount* flops = nullptr);

struct LuSolveItem {
  BlockRef lu;
  /// Index of the block's entry in the PivotTable.
  std::size_t block = 0;
  BlockRef rhs;
};

/// Overwrites every rhs block with the solution (row permutation, forward and
/// backward substitution). Throws SingularBlockError (level -1, node = block
/// index) for blocks flagged singular.
template <class T>
FlopCount batched_lu_solve_inplace(const Executor& exec, BufferTable<T> buffers,
                                   const PivotTable& table, std::span<const LuSolveItem> items);

/// Flop model of one LU factorization of a dim x dim block (exact count of
/// the divisions and multiply-adds the kernel performs).
FlopCount lu_factor_flops(Index dim);
/// Flop model of one LU solve per right-hand side: 2 * dim^2 (every stored
/// LU entry is used once, with one multiply and one add or divide).
FlopCount lu_solve_flops(Index dim, Index nrhs);

}  // namespace hodlr::batched
