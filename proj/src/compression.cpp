#include "hodlr/compression.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <vector>

namespace hodlr {

CompressionMethod parse_compression_method(const std::string& s) {
  if (s == "aca_partial_pivot" || s == "aca") return CompressionMethod::aca_partial_pivot;
  if (s == "aca_rook_pivot" || s == "rook") return CompressionMethod::aca_rook_pivot;
  if (s == "dense_svd" || s == "svd") return CompressionMethod::dense_svd;
  throw std::invalid_argument("unknown compression method '" + s + "'");
}

std::string to_string(CompressionMethod m) {
  switch (m) {
    case CompressionMethod::aca_partial_pivot: return "aca_partial_pivot";
    case CompressionMethod::aca_rook_pivot: return "aca_rook_pivot";
    case CompressionMethod::dense_svd: return "dense_svd";
  }
  return "unknown";
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

template <class T>
void check_finite(const T* data, Index count, IndexRange rows, IndexRange cols, bool is_row) {
  for (Index k = 0; k < count; ++k) {
    if (!finite(data[k])) {
      if (is_row) throw NonFiniteEntryError(rows.start, cols.start + k);
      throw NonFiniteEntryError(rows.start + k, cols.start);
    }
  }
}

template <class T>
Index argmax_abs(const Vector<T>& x) {
  Index best = 0;
  real_t<T> best_val = -1;
  for (Index i = 0; i < x.size(); ++i) {
    const auto a = std::abs(x[i]);
    if (a > best_val) {
      best_val = a;
      best = i;
    }
  }
  return best;
}

template <class T>
LowRankFactor<T> from_columns(const std::vector<Vector<T>>& us, const std::vector<Vector<T>>& vs,
                              Index m, Index n) {
  LowRankFactor<T> f;
  const Index k = static_cast<Index>(us.size());
  f.u.resize(m, k);
  f.v.resize(n, k);
  for (Index l = 0; l < k; ++l) {
    f.u.col(l) = us[l];
    f.v.col(l) = vs[l];
  }
  return f;
}

/// Cross approximation on the residual. With `rook`, row and column argmax
/// sweeps alternate until the pivot is maximal in both its row and column.
template <Scalar T>
LowRankFactor<T> aca(const EntryOracle<T>& oracle, IndexRange rows, IndexRange cols,
                     const CompressionConfig& config, bool rook) {
  using R = real_t<T>;
  const Index m = rows.size();
  const Index n = cols.size();
  const Index cap = config.rank_cap(m, n);
  const R tol = static_cast<R>(config.tol);

  std::vector<Vector<T>> us;
  std::vector<Vector<T>> vs;
  std::vector<char> row_used(m, 0);
  Index rows_left = m;

  auto residual_row = [&](Index i) {
    Vector<T> r(n);
    oracle.fill_block({rows.start + i, rows.start + i + 1}, cols, r.data(), 1);
    check_finite(r.data(), n, {rows.start + i, rows.start + i + 1}, cols, true);
    for (std::size_t l = 0; l < us.size(); ++l) r -= us[l][i] * vs[l].conjugate();
    return r;
  };
  auto mark = [&](Index i) {
    if (!row_used[i]) {
      row_used[i] = 1;
      --rows_left;
    }
  };
  auto residual_col = [&](Index j) {
    Vector<T> c(m);
    oracle.fill_block(rows, {cols.start + j, cols.start + j + 1}, c.data(), m);
    check_finite(c.data(), m, rows, {cols.start + j, cols.start + j + 1}, false);
    for (std::size_t l = 0; l < us.size(); ++l) c -= us[l] * conj(vs[l][j]);
    return c;
  };
  auto next_unused = [&](Index from) {
    for (Index t = 0; t < m; ++t) {
      const Index i = (from + t) % m;
      if (!row_used[i]) return i;
    }
    return Index{-1};
  };

  R estimate2 = 0;  // squared Frobenius norm of the current approximation
  bool converged = false;
  Index i = 0;
  LowRankFactor<T> result;
  while (static_cast<Index>(us.size()) < cap && rows_left > 0) {
    Vector<T> r = residual_row(i);
    Index j = argmax_abs(r);
    if (std::abs(r[j]) == R(0)) {
      mark(i);
      // Zero residual row: contributes nothing, try the next unused one.
      i = next_unused(i + 1);
      if (i < 0) {
        converged = true;
        break;
      }
      continue;
    }
    Vector<T> c = residual_col(j);
    if (rook) {
      for (int sweep = 0; sweep < 8; ++sweep) {
        const Index i2 = argmax_abs(c);
        if (i2 == i || std::abs(c[i2]) <= std::abs(c[i])) break;
        i = i2;
        r = residual_row(i);
        const Index j2 = argmax_abs(r);
        if (j2 == j || std::abs(r[j2]) <= std::abs(r[j])) break;
        j = j2;
        c = residual_col(j);
      }
    }
    mark(i);
    const T pivot = r[j];
    Vector<T> u = c;
    Vector<T> v = (r / pivot).conjugate();

    const R un = u.norm();
    const R vn = v.norm();
    // A cross term already below tolerance only adds noise to the rank.
    if (!us.empty() && un * vn <= tol * std::sqrt(estimate2)) {
      converged = true;
      break;
    }

    // ||S + u v^H||^2 = ||S||^2 + 2 Re sum_l (u_l^H u)(v^H v_l) + |u|^2 |v|^2
    T cross = T(0);
    for (std::size_t l = 0; l < us.size(); ++l) {
      cross += us[l].dot(u) * v.dot(vs[l]);
    }
    estimate2 += R(2) * std::real(cross) + un * un * vn * vn;
    estimate2 = std::max(estimate2, R(0));

    us.push_back(std::move(u));
    vs.push_back(std::move(v));

    // Next row: largest entry of the newest column among unused rows.
    Index best = -1;
    R best_val = -1;
    const auto& last = us.back();
    for (Index t = 0; t < m; ++t) {
      if (!row_used[t] && std::abs(last[t]) > best_val) {
        best_val = std::abs(last[t]);
        best = t;
      }
    }
    if (best < 0) {
      converged = true;
      break;
    }
    i = best;
  }
  if (rows_left == 0) converged = true;

  result = from_columns(us, vs, m, n);
  result.truncated = !converged && static_cast<Index>(us.size()) >= cap && cap < std::min(m, n);
  return result;
}

template <Scalar T>
LowRankFactor<T> svd_truncate(const Matrix<T>& a, const CompressionConfig& config) {
  using R = real_t<T>;
  const Index m = a.rows();
  const Index n = a.cols();
  LowRankFactor<T> f;
  if (m == 0 || n == 0) {
    f.u.resize(m, 0);
    f.v.resize(n, 0);
    return f;
  }
  // BDCSVD in Eigen 3.4 loses small singular triplets on some blocks; Jacobi does not.
  Eigen::JacobiSVD<Matrix<T>> svd(a, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Index k = 0;
  const R threshold = static_cast<R>(config.tol) * s[0];
  while (k < s.size() && s[k] > threshold) ++k;
  const Index cap = config.rank_cap(m, n);
  if (k > cap) {
    k = cap;
    f.truncated = true;
  }
  f.u = svd.matrixU().leftCols(k) * s.head(k).asDiagonal();
  f.v = svd.matrixV().leftCols(k);
  return f;
}

template <Scalar T>
Matrix<T> thin_q(const Matrix<T>& a, Matrix<T>& r_out) {
  const Index m = a.rows();
  const Index k = a.cols();
  const Index p = std::min(m, k);
  Eigen::HouseholderQR<Matrix<T>> qr(a);
  r_out = qr.matrixQR().topRows(p).template triangularView<Eigen::Upper>();
  return qr.householderQ() * Matrix<T>::Identity(m, p);
}

}  // namespace

template <Scalar T>
LowRankFactor<T> compress(const EntryOracle<T>& oracle, IndexRange rows, IndexRange cols,
                          const CompressionConfig& config) {
  if (rows.size() <= 0 || cols.size() <= 0) {
    throw std::invalid_argument("compress: empty row or column range");
  }
  if (!(config.tol > 0) && config.max_rank < 0) {
    throw std::invalid_argument("compress: need tol > 0 or a rank cap");
  }
  switch (config.method) {
    case CompressionMethod::aca_partial_pivot: return aca(oracle, rows, cols, config, false);
    case CompressionMethod::aca_rook_pivot: return aca(oracle, rows, cols, config, true);
    case CompressionMethod::dense_svd: {
      Matrix<T> block(rows.size(), cols.size());
      oracle.fill_block(rows, cols, block.data(), rows.size());
      check_finite(block.data(), block.size(), rows, cols, false);
      return svd_truncate(block, config);
    }
  }
  throw std::logic_error("compress: unknown method");
}

template <Scalar T>
LowRankFactor<T> compress_dense(const Matrix<T>& block, const CompressionConfig& config) {
  if (config.method == CompressionMethod::dense_svd) return svd_truncate(block, config);
  DenseOracle<T> oracle(block);
  return compress(oracle, {0, block.rows()}, {0, block.cols()}, config);
}

template <Scalar T>
LowRankFactor<T> recompress(const LowRankFactor<T>& factor, double tol) {
  using R = real_t<T>;
  if (factor.rank() == 0) return factor;
  Matrix<T> ru;
  Matrix<T> rv;
  const Matrix<T> qu = thin_q(factor.u, ru);
  const Matrix<T> qv = thin_q(factor.v, rv);
  const Matrix<T> core = ru * rv.adjoint();
  Eigen::JacobiSVD<Matrix<T>> svd(core, Eigen::ComputeThinU | Eigen::ComputeThinV);
  const auto& s = svd.singularValues();
  Index k = 0;
  const R threshold = static_cast<R>(tol) * (s.size() ? s[0] : R(0));
  while (k < s.size() && s[k] > threshold) ++k;
  LowRankFactor<T> out;
  out.u = qu * (svd.matrixU().leftCols(k) * s.head(k).asDiagonal());
  out.v = qv * svd.matrixV().leftCols(k);
  out.truncated = factor.truncated;
  return out;
}

#define HODLR_INSTANTIATE(T)                                                                   \
  template LowRankFactor<T> compress(const EntryOracle<T>&, IndexRange, IndexRange,             \
                                     const CompressionConfig&);                                 \
  template LowRankFactor<T> compress_dense(const Matrix<T>&, const CompressionConfig&);          \
  template LowRankFactor<T> recompress(const LowRankFactor<T>&, double);

HODLR_INSTANTIATE(float)
HODLR_INSTANTIATE(double)
HODLR_INSTANTIATE(std::complex<float>)
HODLR_INSTANTIATE(std::complex<double>)

}  // namespace hodlr
