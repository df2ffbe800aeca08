#include "hodlr/hodlr_matrix.hpp"

#include <algorithm>
#include <bit>
#include <cstring>
#include <istream>
#include <ostream>
#include <stdexcept>

namespace hodlr {

template <Scalar T>
bool LevelPanel<T>::uniform() const {
  return std::all_of(node_ranks.begin(), node_ranks.end(),
                     [&](Index r) { return r == node_ranks.front(); });
}

template <Scalar T>
HodlrMatrix<T>::HodlrMatrix(ClusterTree tree, const std::vector<std::vector<Index>>& u_ranks)
    : tree_(std::move(tree)) {
  const int L = tree_.levels();
  const Index n = tree_.size();
  if (static_cast<int>(u_ranks.size()) < L + 1 && L > 0) {
    throw std::invalid_argument("HodlrMatrix: need a rank list for every level 1..L");
  }
  Index off = 0;
  for (const auto& leaf : tree_.leaves()) {
    leaf_offsets_.push_back(off);
    off += leaf.size() * leaf.size();
  }
  d_big_.assign(off, T(0));
  for (int l = 1; l <= L; ++l) {
    const auto& ranks = u_ranks[l];
    if (static_cast<Index>(ranks.size()) != tree_.node_count(l)) {
      throw std::invalid_argument("HodlrMatrix: level " + std::to_string(l) + " needs " +
                                  std::to_string(tree_.node_count(l)) + " ranks");
    }
    for (Index k = 0; k < tree_.node_count(l); ++k) {
      const Index r = ranks[k];
      if (r < 0 || r > tree_.node(l, k).size() || r > tree_.node(l, k ^ 1).size()) {
        throw std::invalid_argument("HodlrMatrix: rank " + std::to_string(r) + " of node (" +
                                    std::to_string(l) + ", " + std::to_string(k) +
                                    ") exceeds its block");
      }
    }
    LevelPanel<T> u;
    u.level = l;
    u.node_ranks = ranks;
    u.col_offsets.assign(ranks.size(), 0);
    u.rows = n;
    u.width = ranks.empty() ? 0 : *std::max_element(ranks.begin(), ranks.end());
    u.data.assign(n * u.width, T(0));
    LevelPanel<T> v = u;
    for (std::size_t k = 0; k < ranks.size(); ++k) v.node_ranks[k] = ranks[k ^ 1];
    u_panels_.push_back(std::move(u));
    v_panels_.push_back(std::move(v));
  }
}

template <Scalar T>
MatrixMap<T> HodlrMatrix<T>::diagonal(Index leaf) {
  const Index m = tree_.leaves()[leaf].size();
  return MatrixMap<T>(d_big_.data() + leaf_offsets_.at(leaf), m, m, Eigen::OuterStride<>(m));
}

template <Scalar T>
ConstMatrixMap<T> HodlrMatrix<T>::diagonal(Index leaf) const {
  const Index m = tree_.leaves()[leaf].size();
  return ConstMatrixMap<T>(d_big_.data() + leaf_offsets_.at(leaf), m, m, Eigen::OuterStride<>(m));
}

namespace {

template <Scalar T, class Panel>
auto panel_block(Panel& p, const IndexRange& rows, Index k) {
  using Map = std::conditional_t<std::is_const_v<Panel>, ConstMatrixMap<T>, MatrixMap<T>>;
  return Map(p.data.data() + rows.start + p.col_offsets[k] * p.ld(), rows.size(), p.node_ranks[k],
             Eigen::OuterStride<>(p.ld()));
}

}  // namespace

template <Scalar T>
MatrixMap<T> HodlrMatrix<T>::u(int level, Index k) {
  return panel_block<T>(u_panel(level), tree_.node(level, k), k);
}
template <Scalar T>
ConstMatrixMap<T> HodlrMatrix<T>::u(int level, Index k) const {
  return panel_block<T>(u_panel(level), tree_.node(level, k), k);
}
template <Scalar T>
MatrixMap<T> HodlrMatrix<T>::v(int level, Index k) {
  return panel_block<T>(v_panel(level), tree_.node(level, k), k);
}
template <Scalar T>
ConstMatrixMap<T> HodlrMatrix<T>::v(int level, Index k) const {
  return panel_block<T>(v_panel(level), tree_.node(level, k), k);
}

namespace {

template <class T>
bool finite(T x) {
  if constexpr (is_complex_v<T>) {
    return std::isfinite(x.real()) && std::isfinite(x.imag());
  } else {
    return std::isfinite(x);
  }
}

}  // namespace

template <Scalar T>
HodlrMatrix<T> assemble(const EntryOracle<T>& oracle, const ClusterTree& tree,
                        const CompressionConfig& config, const Executor& exec) {
  if (oracle.size() != tree.size()) {
    throw std::invalid_argument("assemble: oracle size " + std::to_string(oracle.size()) +
                                " does not match tree size " + std::to_string(tree.size()));
  }
  const int L = tree.levels();
  // factors[l][k] approximates A(I_k, I_{k^1}) = U_k V_{k^1}^H.
  std::vector<std::vector<LowRankFactor<T>>> factors(L + 1);
  std::vector<std::pair<int, Index>> jobs;
  for (int l = 1; l <= L; ++l) {
    factors[l].resize(tree.node_count(l));
    for (Index k = 0; k < tree.node_count(l); ++k) jobs.emplace_back(l, k);
  }
  exec.parallel_for(static_cast<Index>(jobs.size()), [&](Index j) {
    const auto [l, k] = jobs[j];
    factors[l][k] = compress(oracle, tree.node(l, k), tree.node(l, k ^ 1), config);
  });

  std::vector<std::vector<Index>> ranks(L + 1);
  bool truncated = false;
  for (int l = 1; l <= L; ++l) {
    for (const auto& f : factors[l]) {
      ranks[l].push_back(f.rank());
      truncated = truncated || f.truncated;
    }
  }
  HodlrMatrix<T> h(tree, ranks);
  h.set_truncated(truncated);
  for (int l = 1; l <= L; ++l) {
    for (Index k = 0; k < tree.node_count(l); ++k) {
      h.u(l, k) = factors[l][k].u;
      h.v(l, k ^ 1) = factors[l][k].v;
    }
    factors[l].clear();
    factors[l].shrink_to_fit();
  }
  exec.parallel_for(tree.leaf_count(), [&](Index i) {
    const IndexRange r = tree.leaves()[i];
    T* out = h.d_big().data() + h.leaf_offset(i);
    oracle.fill_block(r, r, out, r.size());
    for (Index jj = 0; jj < r.size(); ++jj) {
      for (Index ii = 0; ii < r.size(); ++ii) {
        if (!finite(out[ii + jj * r.size()])) throw NonFiniteEntryError(r.start + ii, r.start + jj);
      }
    }
  });
  return h;
}

template <Scalar T>
Matrix<T> reconstruct_dense(const HodlrMatrix<T>& h, Index max_n) {
  const Index n = h.size();
  if (n > max_n) throw std::length_error("reconstruct_dense: n exceeds dense guard");
  const auto& tree = h.tree();
  Matrix<T> a = Matrix<T>::Zero(n, n);
  for (Index i = 0; i < tree.leaf_count(); ++i) {
    const IndexRange r = tree.leaves()[i];
    a.block(r.start, r.start, r.size(), r.size()) = h.diagonal(i);
  }
  for (int l = 1; l <= h.levels(); ++l) {
    for (Index k = 0; k < tree.node_count(l); ++k) {
      const IndexRange rows = tree.node(l, k);
      const IndexRange cols = tree.node(l, k ^ 1);
      a.block(rows.start, cols.start, rows.size(), cols.size()) = h.u(l, k) * h.v(l, k ^ 1).adjoint();
    }
  }
  return a;
}

template <Scalar T>
Matrix<T> matvec(const HodlrMatrix<T>& h, const Matrix<T>& x) {
  const Index n = h.size();
  if (x.rows() != n) {
    throw std::invalid_argument("matvec: vector has " + std::to_string(x.rows()) +
                                " rows, matrix is " + std::to_string(n));
  }
  const auto& tree = h.tree();
  Matrix<T> y(n, x.cols());
  for (Index i = 0; i < tree.leaf_count(); ++i) {
    const IndexRange r = tree.leaves()[i];
    y.middleRows(r.start, r.size()).noalias() = h.diagonal(i) * x.middleRows(r.start, r.size());
  }
  for (int l = 1; l <= h.levels(); ++l) {
    for (Index k = 0; k < tree.node_count(l); ++k) {
      const IndexRange rows = tree.node(l, k);
      const IndexRange cols = tree.node(l, k ^ 1);
      const Matrix<T> w = h.v(l, k ^ 1).adjoint() * x.middleRows(cols.start, cols.size());
      y.middleRows(rows.start, rows.size()).noalias() += h.u(l, k) * w;
    }
  }
  return y;
}

template <Scalar T>
StorageReport storage_report(const HodlrMatrix<T>& h) {
  StorageReport s;
  const auto& tree = h.tree();
  for (Index i = 0; i < tree.leaf_count(); ++i) {
    const auto m = static_cast<std::uint64_t>(tree.leaves()[i].size());
    s.diagonal_scalars += m * m;
  }
  std::uint64_t allocated = s.diagonal_scalars;
  bool uniform_rank = true;
  const Index r0 = h.levels() > 0 ? h.u_rank(1, 0) : 0;
  for (int l = 1; l <= h.levels(); ++l) {
    for (Index k = 0; k < tree.node_count(l); ++k) {
      const auto nk = static_cast<std::uint64_t>(tree.node(l, k).size());
      s.u_basis_scalars += nk * static_cast<std::uint64_t>(h.u_rank(l, k));
      s.v_basis_scalars += nk * static_cast<std::uint64_t>(h.v_rank(l, k));
      uniform_rank = uniform_rank && h.u_rank(l, k) == r0;
    }
    allocated += h.u_panel(l).data.size() + h.v_panel(l).data.size();
  }
  s.basis_scalars = s.u_basis_scalars + s.v_basis_scalars;
  s.allocated_scalars = allocated;
  s.scalar_bytes = sizeof(T);
  s.bytes_diagonal = s.diagonal_scalars * sizeof(T);
  s.bytes_bases = s.basis_scalars * sizeof(T);
  s.bytes_total = allocated * sizeof(T);
  if (tree.uniform_leaves() && uniform_rank) {
    const auto n = static_cast<std::uint64_t>(h.size());
    const auto m = static_cast<std::uint64_t>(tree.max_leaf_size());
    const auto r = static_cast<std::uint64_t>(r0);
    const auto L = static_cast<std::uint64_t>(h.levels());
    s.predicted_representation = m * n + 2 * r * n * L;
    s.predicted_factorization = m * n + r * n * L;
  }
  return s;
}

// ---- binary dump ----

namespace {

constexpr char kMagic[8] = {'H', 'O', 'D', 'L', 'R', 'B', 'I', 'N'};
constexpr std::uint32_t kVersion = 1;

template <class U>
void put(std::ostream& out, U v) {
  unsigned char b[sizeof(U)];
  for (std::size_t i = 0; i < sizeof(U); ++i) b[i] = static_cast<unsigned char>(v >> (8 * i));
  out.write(reinterpret_cast<const char*>(b), sizeof(U));
}

template <class U>
U get(std::istream& in) {
  unsigned char b[sizeof(U)];
  if (!in.read(reinterpret_cast<char*>(b), sizeof(U))) {
    throw std::runtime_error("read_binary: unexpected end of input");
  }
  U v = 0;
  for (std::size_t i = 0; i < sizeof(U); ++i) v |= static_cast<U>(b[i]) << (8 * i);
  return v;
}

template <class R>
using bits_t = std::conditional_t<sizeof(R) == 4, std::uint32_t, std::uint64_t>;

template <Scalar T>
void put_scalars(std::ostream& out, const T* data, Index count) {
  using R = real_t<T>;
  const R* p = reinterpret_cast<const R*>(data);
  const Index reals = count * (is_complex_v<T> ? 2 : 1);
  if constexpr (std::endian::native == std::endian::little) {
    out.write(reinterpret_cast<const char*>(p), static_cast<std::streamsize>(reals * sizeof(R)));
  } else {
    for (Index i = 0; i < reals; ++i) put(out, std::bit_cast<bits_t<R>>(p[i]));
  }
}

template <Scalar T>
void get_scalars(std::istream& in, T* data, Index count) {
  using R = real_t<T>;
  R* p = reinterpret_cast<R*>(data);
  const Index reals = count * (is_complex_v<T> ? 2 : 1);
  if constexpr (std::endian::native == std::endian::little) {
    if (!in.read(reinterpret_cast<char*>(p), static_cast<std::streamsize>(reals * sizeof(R)))) {
      throw std::runtime_error("read_binary: unexpected end of input");
    }
  } else {
    for (Index i = 0; i < reals; ++i) p[i] = std::bit_cast<R>(get<bits_t<R>>(in));
  }
}

template <Scalar T, class Panel>
void put_panel(std::ostream& out, const Panel& p, const ClusterTree& tree) {
  for (Index k = 0; k < tree.node_count(p.level); ++k) {
    const IndexRange r = tree.node(p.level, k);
    for (Index c = 0; c < p.node_ranks[k]; ++c) {
      put_scalars(out, p.data.data() + r.start + (p.col_offsets[k] + c) * p.ld(), r.size());
    }
  }
}

template <Scalar T, class Panel>
void get_panel(std::istream& in, Panel& p, const ClusterTree& tree) {
  for (Index k = 0; k < tree.node_count(p.level); ++k) {
    const IndexRange r = tree.node(p.level, k);
    for (Index c = 0; c < p.node_ranks[k]; ++c) {
      get_scalars(in, p.data.data() + r.start + (p.col_offsets[k] + c) * p.ld(), r.size());
    }
  }
}

Field read_header_field(std::istream& in) {
  char magic[8];
  if (!in.read(magic, 8) || std::memcmp(magic, kMagic, 8) != 0) {
    throw std::runtime_error("read_binary: not a HODLR dump (bad magic)");
  }
  const auto version = get<std::uint32_t>(in);
  if (version != kVersion) {
    throw std::runtime_error("read_binary: unsupported version " + std::to_string(version));
  }
  const auto tag = get<std::uint32_t>(in);
  if (tag < 1 || tag > 4) throw std::runtime_error("read_binary: bad field tag " + std::to_string(tag));
  return static_cast<Field>(tag);
}

}  // namespace

template <Scalar T>
void write_binary(const HodlrMatrix<T>& h, std::ostream& out) {
  out.write(kMagic, 8);
  put(out, kVersion);
  put(out, static_cast<std::uint32_t>(field_of<T>()));
  put(out, static_cast<std::uint64_t>(h.size()));
  put(out, static_cast<std::uint64_t>(h.levels()));
  for (int l = 1; l <= h.levels(); ++l) {
    for (Index r : h.level_ranks(l)) put(out, static_cast<std::uint64_t>(r));
  }
  put_scalars(out, h.d_big().data(), static_cast<Index>(h.d_big().size()));
  for (int l = 1; l <= h.levels(); ++l) put_panel<T>(out, h.u_panel(l), h.tree());
  for (int l = 1; l <= h.levels(); ++l) put_panel<T>(out, h.v_panel(l), h.tree());
  if (!out) throw std::runtime_error("write_binary: write failed");
}

Field peek_binary_field(std::istream& in) {
  const auto pos = in.tellg();
  const Field f = read_header_field(in);
  in.seekg(pos);
  return f;
}

template <Scalar T>
HodlrMatrix<T> read_binary(std::istream& in) {
  const Field f = read_header_field(in);
  if (f != field_of<T>()) {
    throw std::runtime_error("read_binary: dump holds " + to_string(f) + ", expected " +
                             to_string(field_of<T>()));
  }
  const auto n = get<std::uint64_t>(in);
  const auto L = get<std::uint64_t>(in);
  if (n == 0 || L > 62 || (std::uint64_t{1} << L) > n) {
    throw std::runtime_error("read_binary: inconsistent header (n=" + std::to_string(n) +
                             ", L=" + std::to_string(L) + ")");
  }
  auto tree = ClusterTree::with_levels(static_cast<Index>(n), static_cast<int>(L));
  std::vector<std::vector<Index>> ranks(L + 1);
  for (std::uint64_t l = 1; l <= L; ++l) {
    for (Index k = 0; k < tree.node_count(static_cast<int>(l)); ++k) {
      ranks[l].push_back(static_cast<Index>(get<std::uint64_t>(in)));
    }
  }
  HodlrMatrix<T> h(tree, ranks);
  get_scalars(in, h.d_big().data(), static_cast<Index>(h.d_big().size()));
  for (int l = 1; l <= h.levels(); ++l) get_panel<T>(in, h.u_panel(l), h.tree());
  for (int l = 1; l <= h.levels(); ++l) get_panel<T>(in, h.v_panel(l), h.tree());
  return h;
}

#define HODLR_INSTANTIATE(T)                                                                \
  template struct LevelPanel<T>;                                                            \
  template class HodlrMatrix<T>;                                                            \
  template HodlrMatrix<T> assemble(const EntryOracle<T>&, const ClusterTree&,               \
                                   const CompressionConfig&, const Executor&);              \
  template Matrix<T> reconstruct_dense(const HodlrMatrix<T>&, Index);                       \
  template Matrix<T> matvec(const HodlrMatrix<T>&, const Matrix<T>&);                       \
  template StorageReport storage_report(const HodlrMatrix<T>&);                             \
  template void write_binary(const HodlrMatrix<T>&, std::ostream&);                         \
  template HodlrMatrix<T> read_binary<T>(std::istream&);

HODLR_INSTANTIATE(float)
HODLR_INSTANTIATE(double)
HODLR_INSTANTIATE(std::complex<float>)
HODLR_INSTANTIATE(std::complex<double>)

}  // namespace hodlr
