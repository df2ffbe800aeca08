#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstring>
#include <random>
#include <vector>

#include "hodlr/batched.hpp"

using namespace hodlr;
using namespace hodlr::batched;

namespace {

template <class T>
std::vector<T> random_buffer(std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1, 1);
  std::vector<T> v(n);
  for (auto& x : v) {
    if constexpr (is_complex_v<T>) {
      x = T(u(rng), u(rng));
    } else {
      x = T(u(rng));
    }
  }
  return v;
}

template <class T>
bool same_bits(const std::vector<T>& a, const std::vector<T>& b) {
  return a.size() == b.size() && std::memcmp(a.data(), b.data(), a.size() * sizeof(T)) == 0;
}

template <class T>
ConstMatrixMap<T> view(const std::vector<T>& buf, const BlockRef& r) {
  return ConstMatrixMap<T>(buf.data() + r.offset, r.rows, r.cols, Eigen::OuterStride<>(r.ld));
}

}  // namespace

TEST_CASE("gemm scalar examples") {
  std::vector<double> buf{2, 3, 0};
  std::vector<std::span<double>> table{buf};
  GemmItem it{{0, 0, 1, 1, 1}, {0, 1, 1, 1, 1}, {0, 2, 1, 1, 1}};
  batched_gemm<double>(Executor::serial(), table, std::span(&it, 1), 1.0, 0.0);
  CHECK(buf[2] == 6.0);

  using C = std::complex<double>;
  std::vector<C> cb{C(0, 1), C(1, 0), C(0, 0)};
  std::vector<std::span<C>> ct{cb};
  batched_gemm<C>(Executor::serial(), ct, std::span(&it, 1), C(1), C(0), Op::conj_transpose);
  CHECK(cb[2] == C(0, -1));
}

TEST_CASE("batched gemm matches sequential execution bit for bit") {
  const Index d = 16, count = 8;
  const auto a = random_buffer<double>(d * d * count, 1);
  const auto b = random_buffer<double>(d * d * count, 2);
  const auto c0 = random_buffer<double>(d * d * count, 3);
  for (Op op : {Op::none, Op::conj_transpose}) {
    std::vector<GemmItem> items;
    for (Index k = 0; k < count; ++k) {
      items.push_back({{0, k * d * d, d, d, d}, {1, k * d * d, d, d, d}, {2, k * d * d, d, d, d}});
    }
    auto abuf = a, bbuf = b;
    auto seq = c0;
    {
      std::vector<std::span<double>> t{abuf, bbuf, seq};
      for (const auto& it : items) {
        batched_gemm<double>(Executor::serial(), t, std::span(&it, 1), 0.5, -1.0, op);
      }
    }
    auto par = c0;
    std::vector<std::span<double>> t{abuf, bbuf, par};
    const auto flops = batched_gemm<double>(Executor::threads(4), t, items, 0.5, -1.0, op);
    CHECK(same_bits(seq, par));
    CHECK(flops == FlopCount(2 * d * d * d * count));
    for (const auto& it : items) {
      Matrix<double> opa = view(a, it.a);
      if (op == Op::conj_transpose) opa.transposeInPlace();
      const Matrix<double> want = 0.5 * opa * view(b, it.b) - view(c0, it.c);
      CHECK((view(par, it.c) - want).norm() <= 1e-13 * want.norm());
    }

    StridedGemm sg{items[0], d * d, d * d, d * d, count};
    auto str = c0;
    std::vector<std::span<double>> ts{abuf, bbuf, str};
    strided_batched_gemm<double>(Executor::threads(3), ts, sg, 0.5, -1.0, op);
    CHECK(same_bits(seq, str));
  }
}

namespace {

// Each entry: beta * c, then the k products added one at a time.
template <class T>
std::vector<T> gemm_recurrence(const std::vector<T>& a, Index lda, const std::vector<T>& b,
                               Index ldb, std::vector<T> c, Index ldc, Index m, Index k,
                               Index cols, T alpha, T beta, Op op) {
  for (Index j = 0; j < cols; ++j) {
    for (Index i = 0; i < m; ++i) {
      T s = beta == T(0) ? T(0) : (beta == T(1) ? c[i + j * ldc] : c[i + j * ldc] * beta);
      for (Index p = 0; p < k; ++p) {
        if (op == Op::none) {
          s += a[i + p * lda] * (alpha * b[p + j * ldb]);
        } else {
          T x = a[p + i * lda];
          if constexpr (is_complex_v<T>) x = std::conj(x);
          s += alpha * (x * b[p + j * ldb]);
        }
      }
      c[i + j * ldc] = s;
    }
  }
  return c;
}

template <class T>
void check_tiled_gemm() {
  std::uint64_t seed = 100;
  for (Op op : {Op::none, Op::conj_transpose}) {
    for (Index m : {1, 3, 130, 300}) {
      for (Index k : {1, 5, 700}) {
        for (Index cols : {1, 2, 3, 7}) {
          const Index ar = op == Op::none ? m : k;
          const Index ac = op == Op::none ? k : m;
          const Index lda = ar + 3, ldb = k + 2, ldc = m + 1;
          const auto a = random_buffer<T>(lda * ac, seed++);
          const auto b = random_buffer<T>(ldb * cols, seed++);
          const auto c0 = random_buffer<T>(ldc * cols, seed++);
          const T alpha = T(0.75), beta = T(-0.5);
          const auto want = gemm_recurrence(a, lda, b, ldb, c0, ldc, m, k, cols, alpha, beta, op);
          auto abuf = a, bbuf = b, got = c0;
          std::vector<std::span<T>> t{abuf, bbuf, got};
          GemmItem it{{0, 0, ar, ac, lda}, {1, 0, k, cols, ldb}, {2, 0, m, cols, ldc}};
          batched_gemm<T>(Executor::serial(), t, std::span(&it, 1), alpha, beta, op);
          INFO("m " << m << " k " << k << " cols " << cols);
          CHECK(same_bits(got, want));
        }
      }
    }
  }
}

}  // namespace

TEST_CASE("tiled gemm keeps the per-entry summation order") {
  check_tiled_gemm<double>();
  check_tiled_gemm<float>();
  check_tiled_gemm<std::complex<double>>();
}

TEST_CASE("complex conj-transpose gemm against dense product") {
  using C = std::complex<double>;
  const auto a = random_buffer<C>(9 * 7, 11);
  const auto b = random_buffer<C>(9 * 5, 12);
  std::vector<C> c(7 * 5);
  auto abuf = a, bbuf = b;
  std::vector<std::span<C>> t{abuf, bbuf, c};
  GemmItem it{{0, 0, 9, 7, 9}, {1, 0, 9, 5, 9}, {2, 0, 7, 5, 7}};
  batched_gemm<C>(Executor::serial(), t, std::span(&it, 1), C(1), C(0), Op::conj_transpose);
  const Matrix<C> want = view(a, it.a).adjoint() * view(b, it.b);
  CHECK((view(c, it.c) - want).norm() <= 1e-14 * want.norm());
}

TEST_CASE("grouped large gemm") {
  const Index m = 512, k = 8, n = 512;
  const auto a = random_buffer<double>(m * k, 5);
  const auto b = random_buffer<double>(k * n, 6);
  auto abuf = a, bbuf = b;
  std::vector<double> ref(m * n), g1(m * n), g2(m * n);
  GemmItem it{{0, 0, m, k, m}, {1, 0, k, n, k}, {2, 0, m, n, m}};
  {
    std::vector<std::span<double>> t{abuf, bbuf, ref};
    batched_gemm<double>(Executor::serial(), t, std::span(&it, 1), 1.0, 0.0);
  }
  {
    std::vector<std::span<double>> t{abuf, bbuf, g1};
    grouped_gemm_large<double>(Executor::serial(), t, std::span(&it, 1), 1.0, 0.0);
  }
  {
    std::vector<std::span<double>> t{abuf, bbuf, g2};
    grouped_gemm_large<double>(Executor::threads(4).set_inner_parallel(true), t, std::span(&it, 1),
                               1.0, 0.0);
  }
  CHECK(same_bits(ref, g1));
  CHECK(same_bits(ref, g2));

  std::vector<std::span<double>> t{abuf, bbuf, g1};
  CHECK(grouped_gemm_large<double>(Executor::serial(), t, {}, 1.0, 0.0) == 0);

  // Two items against one-at-a-time execution.
  std::vector<double> s1(m * n), s2(m * n);
  std::vector<GemmItem> two{{{0, 0, m / 2, k, m}, {1, 0, k, n, k}, {2, 0, m / 2, n, m}},
                            {{0, m / 2, m / 2, k, m}, {1, 0, k, n, k}, {2, m / 2, m / 2, n, m}}};
  {
    std::vector<std::span<double>> t1{abuf, bbuf, s1};
    grouped_gemm_large<double>(Executor::threads(2), t1, two, 1.0, 0.0);
    std::vector<std::span<double>> t2{abuf, bbuf, s2};
    for (const auto& x : two) batched_gemm<double>(Executor::serial(), t2, std::span(&x, 1), 1.0, 0.0);
  }
  CHECK(same_bits(s1, s2));
  CHECK(same_bits(s1, ref));
}

TEST_CASE("gemm validation names the item") {
  std::vector<double> buf(100);
  std::vector<std::span<double>> t{buf};
  std::vector<GemmItem> items{{{0, 0, 2, 2, 2}, {0, 4, 2, 2, 2}, {0, 8, 2, 2, 2}},
                              {{0, 0, 2, 3, 2}, {0, 4, 2, 2, 2}, {0, 20, 2, 2, 2}}};
  try {
    batched_gemm<double>(Executor::serial(), t, items, 1.0, 0.0);
    FAIL("expected an error");
  } catch (const std::invalid_argument& e) {
    CHECK(std::string(e.what()).find("item 1") != std::string::npos);
  }
  items[1] = {{0, 0, 2, 2, 2}, {0, 4, 2, 2, 2}, {0, 99, 2, 2, 2}};
  CHECK_THROWS_AS(batched_gemm<double>(Executor::serial(), t, items, 1.0, 0.0), std::invalid_argument);

  // Interleaved row blocks of one panel are disjoint; overlapping ones are not.
  std::vector<GemmItem> rows{{{0, 0, 3, 2, 3}, {0, 6, 2, 2, 2}, {0, 40, 3, 2, 10}},
                             {{0, 0, 3, 2, 3}, {0, 6, 2, 2, 2}, {0, 43, 3, 2, 10}}};
  CHECK_NOTHROW(validate_gemm<double>(t, rows, Op::none));
  rows[1].c.offset = 42;
  CHECK_THROWS_AS(validate_gemm<double>(t, rows, Op::none), std::invalid_argument);
}

TEST_CASE("LU factor examples") {
  std::vector<double> buf{2, 0, 1, 1, 0};
  std::vector<std::span<double>> t{buf};
  std::vector<BlockRef> blocks{{0, 0, 1, 1, 1}, {0, 1, 2, 2, 2}};
  const auto table = batched_lu_factor_inplace<double>(Executor::serial(), t, blocks);
  CHECK(buf[0] == 2.0);
  CHECK(table.block_pivots(0)[0] == 0);
  CHECK(table.block_pivots(1)[0] == 1);
  CHECK(table.block_pivots(1)[1] == 1);
  // [[0,1],[1,0]] after the swap is the identity: L = I, U = I.
  CHECK(buf[1] == 1.0);
  CHECK(buf[2] == 0.0);
  CHECK(buf[3] == 0.0);
  CHECK(buf[4] == 1.0);
  CHECK(table.status[0] == BlockStatus::ok);
  CHECK(table.status[1] == BlockStatus::ok);
}

TEST_CASE("batched LU reconstructs P A") {
  const Index d = 32, count = 6;
  const auto orig = random_buffer<double>(d * d * count, 21);
  auto buf = orig;
  std::vector<std::span<double>> t{buf};
  std::vector<BlockRef> blocks;
  for (Index k = 0; k < count; ++k) blocks.push_back({0, k * d * d, d, d, d});
  FlopCount flops = 0;
  const auto table = batched_lu_factor_inplace<double>(Executor::threads(3), t, blocks,
                                                       Pivoting::partial, &flops);
  CHECK(flops == lu_factor_flops(d) * count);
  for (Index k = 0; k < count; ++k) {
    Matrix<double> a = view(orig, blocks[k]);
    const auto piv = table.block_pivots(k);
    for (Index i = 0; i < d; ++i) a.row(i).swap(a.row(piv[i]));
    const Matrix<double> lu = view(buf, blocks[k]);
    Matrix<double> l = lu.triangularView<Eigen::UnitLower>();
    Matrix<double> u = lu.triangularView<Eigen::Upper>();
    CHECK((l * u - a).norm() <= 1e-13 * a.norm());
  }
  auto serial = orig;
  std::vector<std::span<double>> ts{serial};
  batched_lu_factor_inplace<double>(Executor::serial(), ts, blocks);
  CHECK(same_bits(serial, buf));
}

TEST_CASE("LU solve") {
  // Identity and diagonal examples.
  std::vector<double> buf{1, 0, 0, 1, 5, -7, 2, 0, 0, 4, 2, 4};
  std::vector<std::span<double>> t{buf};
  std::vector<BlockRef> blocks{{0, 0, 2, 2, 2}, {0, 6, 2, 2, 2}};
  const auto table = batched_lu_factor_inplace<double>(Executor::serial(), t, blocks);
  std::vector<LuSolveItem> items{{blocks[0], 0, {0, 4, 2, 1, 2}}, {blocks[1], 1, {0, 10, 2, 1, 2}}};
  const auto f = batched_lu_solve_inplace<double>(Executor::serial(), t, table, items);
  CHECK(f == 2 * lu_solve_flops(2, 1));
  CHECK(buf[4] == 5.0);
  CHECK(buf[5] == -7.0);
  CHECK(buf[10] == 1.0);
  CHECK(buf[11] == 1.0);
}

TEST_CASE("LU solve against a dense solve") {
  using C = std::complex<double>;
  const Index d = 24, nrhs = 3;
  const auto a = random_buffer<C>(d * d, 31);
  const auto b = random_buffer<C>(d * nrhs, 32);
  auto abuf = a, x = b;
  std::vector<std::span<C>> t{abuf, x};
  BlockRef blk{0, 0, d, d, d};
  const auto table = batched_lu_factor_inplace<C>(Executor::serial(), t, std::span(&blk, 1));
  LuSolveItem it{blk, 0, {1, 0, d, nrhs, d}};
  batched_lu_solve_inplace<C>(Executor::serial(), t, table, std::span(&it, 1));
  const Matrix<C> want = Eigen::PartialPivLU<Matrix<C>>(view(a, blk)).solve(view(b, it.rhs));
  CHECK((view(x, it.rhs) - want).norm() <= 1e-13 * want.norm());
}

TEST_CASE("singular blocks are flagged and refuse to solve") {
  std::vector<double> buf{1, 2, 2, 4, 1, 1, 1e-300, 0, 0, 1};
  std::vector<std::span<double>> t{buf};
  std::vector<BlockRef> blocks{{0, 0, 2, 2, 2}, {0, 6, 2, 2, 2}};
  const auto table = batched_lu_factor_inplace<double>(Executor::serial(), t, blocks);
  CHECK(table.status[0] == BlockStatus::singular);
  CHECK(table.status[1] == BlockStatus::ok);
  LuSolveItem it{blocks[0], 0, {0, 4, 2, 1, 2}};
  try {
    batched_lu_solve_inplace<double>(Executor::serial(), t, table, std::span(&it, 1));
    FAIL("expected SingularBlockError");
  } catch (const SingularBlockError& e) {
    CHECK(e.node() == 0);
  }

  // Second pivot is one ulp of 1.
  std::vector<double> near{1, 1, 1, 1 + 2.3e-16};
  std::vector<std::span<double>> tn{near};
  BlockRef nb{0, 0, 2, 2, 2};
  const auto tab = batched_lu_factor_inplace<double>(Executor::serial(), tn, std::span(&nb, 1));
  CHECK(tab.status[0] == BlockStatus::near_singular);
}
