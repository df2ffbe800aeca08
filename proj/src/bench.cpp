#include "hodlr/bench.hpp"

#include <charconv>
#include <chrono>
#include <fstream>
#include <istream>
#include <memory>
#include <ostream>
#include <set>
#include <sstream>
#include <unistd.h>

#include <json.hpp>

#include "hodlr/compression.hpp"
#include "hodlr/executor.hpp"
#include "hodlr/factorization.hpp"
#include "hodlr/hodlr_matrix.hpp"
#include "hodlr/oracle.hpp"
#include "hodlr/problems.hpp"
#include "hodlr/solver.hpp"

namespace hodlr::bench {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  std::istringstream in(s);
  while (std::getline(in, cur, sep)) out.push_back(trim(cur));
  if (!s.empty() && s.back() == sep) out.emplace_back();
  return out;
}

[[noreturn]] void bad(const std::string& key, const std::string& value, int line,
                      const std::string& why) {
  std::string where = line > 0 ? "line " + std::to_string(line) + ": " : "";
  throw ConfigError(where + "key '" + key + "': " + why + " (got '" + value + "')", line, key);
}

template <class I>
I parse_integer(const std::string& key, const std::string& v, int line) {
  // "2^k" is accepted for sizes.
  if (const auto caret = v.find('^'); caret != std::string::npos) {
    const auto base = parse_integer<I>(key, v.substr(0, caret), line);
    const auto exp = parse_integer<int>(key, v.substr(caret + 1), line);
    if (base != 2 || exp < 0 || exp > 40) bad(key, v, line, "only 2^k with 0 <= k <= 40");
    return I{1} << exp;
  }
  I out{};
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || p != end) bad(key, v, line, "expected an integer");
  return out;
}

double parse_real(const std::string& key, const std::string& v, int line) {
  double out = 0;
  const auto* end = v.data() + v.size();
  const auto [p, ec] = std::from_chars(v.data(), end, out);
  if (v.empty() || ec != std::errc() || p != end) bad(key, v, line, "expected a number");
  return out;
}

template <class T, class F>
std::vector<T> parse_list(const std::string& key, const std::string& v, int line, F&& one) {
  std::vector<T> out;
  for (const auto& item : split(v, ',')) {
    if (item.empty()) bad(key, v, line, "empty list item");
    out.push_back(one(item));
  }
  if (out.empty()) bad(key, v, line, "empty list");
  return out;
}

std::string format_real(double x) {
  char buf[64];
  const auto [p, ec] = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, p);
}

std::string join_ranks(const std::vector<Index>& r) {
  std::string s;
  for (std::size_t i = 0; i < r.size(); ++i) {
    if (i > 0) s += '/';
    s += std::to_string(r[i]);
  }
  return s;
}

}  // namespace

std::string to_string(Problem p) {
  switch (p) {
    case Problem::rpy: return "rpy";
    case Problem::laplace: return "laplace";
    case Problem::helmholtz: return "helmholtz";
  }
  return "?";
}

std::string to_string(Precision p) { return p == Precision::single ? "single" : "double"; }

Problem parse_problem(const std::string& s) {
  if (s == "rpy") return Problem::rpy;
  if (s == "laplace") return Problem::laplace;
  if (s == "helmholtz") return Problem::helmholtz;
  throw std::invalid_argument("unknown problem '" + s + "' (rpy, laplace, helmholtz)");
}

Precision parse_precision(const std::string& s) {
  if (s == "single") return Precision::single;
  if (s == "double") return Precision::double_;
  throw std::invalid_argument("unknown precision '" + s + "' (single, double)");
}

Format parse_format(const std::string& s) {
  if (s == "csv") return Format::csv;
  if (s == "jsonl") return Format::jsonl;
  throw std::invalid_argument("unknown format '" + s + "' (csv, jsonl)");
}

void Config::set(const std::string& key, const std::string& raw, int line) {
  const std::string v = trim(raw);
  auto named = [&](auto parse) {
    try {
      return parse(v);
    } catch (const std::invalid_argument& e) {
      bad(key, v, line, e.what());
    }
  };
  if (key == "problem") {
    problems = parse_list<Problem>(key, v, line, [&](const std::string& s) {
      try {
        return parse_problem(s);
      } catch (const std::invalid_argument& e) {
        bad(key, v, line, e.what());
      }
    });
  } else if (key == "n") {
    sizes = parse_list<Index>(key, v, line, [&](const std::string& s) {
      const auto n = parse_integer<Index>(key, s, line);
      if (n < 16) bad(key, v, line, "sizes must be at least 16");
      return n;
    });
  } else if (key == "tol") {
    tols = parse_list<double>(key, v, line, [&](const std::string& s) {
      const double t = parse_real(key, s, line);
      if (!(t > 0 && t < 1)) bad(key, v, line, "tolerances must lie in (0, 1)");
      return t;
    });
  } else if (key == "precision") {
    precisions = parse_list<Precision>(key, v, line, [&](const std::string& s) {
      try {
        return parse_precision(s);
      } catch (const std::invalid_argument& e) {
        bad(key, v, line, e.what());
      }
    });
  } else if (key == "leaf_size") {
    leaf_size = parse_integer<Index>(key, v, line);
    if (leaf_size < 1) bad(key, v, line, "must be positive");
  } else if (key == "max_rank") {
    max_rank = parse_integer<Index>(key, v, line);
    if (max_rank < -1) bad(key, v, line, "must be -1 (uncapped) or >= 0");
  } else if (key == "compression") {
    named([](const std::string& s) { return parse_compression_method(s); });
    compression = v;
  } else if (key == "kappa") {
    kappa = parse_real(key, v, line);
    if (!(kappa > 0)) bad(key, v, line, "must be positive");
  } else if (key == "eta") {
    eta = parse_real(key, v, line);
  } else if (key == "seed") {
    seed = parse_integer<std::uint64_t>(key, v, line);
  } else if (key == "executor") {
    named([](const std::string& s) { return Executor::parse(s); });
    executor = v;
  } else if (key == "large_gemm_levels") {
    large_gemm_levels = parse_integer<int>(key, v, line);
    if (large_gemm_levels < 0) bad(key, v, line, "must be >= 0");
  } else if (key == "k_variant") {
    named([](const std::string& s) { return parse_k_variant(s); });
    k_variant = v;
  } else if (key == "runs") {
    runs = parse_integer<int>(key, v, line);
    if (runs < 1) bad(key, v, line, "must be >= 1");
  } else if (key == "memory_budget") {
    memory_budget = parse_integer<std::uint64_t>(key, v, line);
  } else {
    throw ConfigError((line > 0 ? "line " + std::to_string(line) + ": " : std::string()) +
                          "unknown key '" + key + "'",
                      line, key);
  }
}

Config parse_config(std::istream& in) {
  Config c;
  std::set<std::string> seen;
  std::string text;
  int line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (const auto hash = text.find('#'); hash != std::string::npos) text.resize(hash);
    text = trim(text);
    if (text.empty()) continue;
    const auto eq = text.find('=');
    if (eq == std::string::npos) {
      throw ConfigError("line " + std::to_string(line) + ": expected key = value", line, "");
    }
    const std::string key = trim(text.substr(0, eq));
    if (key.empty()) throw ConfigError("line " + std::to_string(line) + ": empty key", line, "");
    if (!seen.insert(key).second) {
      throw ConfigError("line " + std::to_string(line) + ": key '" + key + "' given twice", line,
                        key);
    }
    c.set(key, text.substr(eq + 1), line);
  }
  return c;
}

Config parse_config_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open config file '" + path + "'", 0, "");
  return parse_config(in);
}

std::vector<Cell> cells(const Config& c) {
  std::vector<Cell> out;
  for (Problem p : c.problems)
    for (Index n : c.sizes)
      for (double t : c.tols)
        for (Precision pr : c.precisions) out.push_back({p, n, t, pr});
  return out;
}

void evict_caches() {
  static std::vector<unsigned char> junk = [] {
    long llc = 0;
#ifdef _SC_LEVEL3_CACHE_SIZE
    llc = sysconf(_SC_LEVEL3_CACHE_SIZE);
#endif
    const std::size_t bytes = llc > 0 ? 2 * static_cast<std::size_t>(llc) : std::size_t{256} << 20;
    return std::vector<unsigned char>(bytes, 1);
  }();
  for (std::size_t i = 0; i < junk.size(); i += 64) junk[i] += 1;
  // Keep the writes observable so the loop is not dropped.
  static volatile unsigned char sink;
  sink = junk[junk.size() / 2];
}

namespace {

using Clock = std::chrono::steady_clock;

double seconds_since(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

/// Random right-hand side in the double field D, uniform in [-1, 1].
template <Scalar D>
Matrix<D> random_rhs(Index n, std::uint64_t seed) {
  Xorshift64Star rng(seed);
  Matrix<D> b(n, 1);
  for (Index i = 0; i < n; ++i) {
    if constexpr (is_complex_v<D>) {
      const double re = rng.uniform(-1, 1);
      b(i) = D(re, rng.uniform(-1, 1));
    } else {
      b(i) = rng.uniform(-1, 1);
    }
  }
  return b;
}

/// Runs one cell in working scalar T against the exact operator `exact` in
/// the matching double-precision field D.
template <Scalar T, Scalar D>
Record run_typed(const Config& c, const Cell& cell, std::shared_ptr<const EntryOracle<D>> exact) {
  std::shared_ptr<const EntryOracle<T>> work;
  if constexpr (std::is_same_v<T, D>) {
    work = exact;
  } else {
    work = std::make_shared<CastOracle<T, D>>(exact);
  }
  Executor exec = Executor::parse(c.executor);
  exec.set_large_gemm_levels(c.large_gemm_levels);
  const KVariant variant = parse_k_variant(c.k_variant);

  const ClusterTree tree = ClusterTree::build(cell.n, c.leaf_size);
  const Index L = tree.levels();
  const auto sz = static_cast<std::uint64_t>(sizeof(T));
  // Before assembling, bound storage with the rank cap (or the leaf size
  // when uncapped; real ranks may still exceed it, rechecked below).
  {
    const auto n = static_cast<std::uint64_t>(cell.n);
    const auto m = static_cast<std::uint64_t>(tree.max_leaf_size());
    const auto r = static_cast<std::uint64_t>(c.max_rank >= 0 ? c.max_rank : c.leaf_size);
    const std::uint64_t k = 4 * r * r * ((std::uint64_t{1} << L) - 1);
    const std::uint64_t predicted = sz * (m * n + 2 * r * n * L + k);
    if (predicted > c.memory_budget) {
      throw CellError("predicted storage " + std::to_string(predicted) +
                      " bytes exceeds memory_budget " + std::to_string(c.memory_budget));
    }
  }

  CompressionConfig cc;
  cc.tol = cell.tol;
  cc.max_rank = c.max_rank;
  cc.method = parse_compression_method(c.compression);
  const HodlrMatrix<T> h = assemble(*work, tree, cc, exec);
  const StorageReport rep = storage_report(h);
  std::uint64_t k_scalars = 0;
  for (int l = 1; l <= L; ++l) {
    for (Index g = 0; g < tree.node_count(l - 1); ++g) {
      const auto d = static_cast<std::uint64_t>(h.u_rank(l, 2 * g) + h.u_rank(l, 2 * g + 1));
      k_scalars += d * d;
    }
  }
  const std::uint64_t mem = rep.bytes_total + sz * k_scalars;
  if (mem > c.memory_budget) {
    throw CellError("storage " + std::to_string(mem) + " bytes exceeds memory_budget " +
                    std::to_string(c.memory_budget));
  }

  const Matrix<D> b_exact = random_rhs<D>(cell.n, c.seed);
  const Matrix<T> b = b_exact.template cast<T>();

  std::optional<HodlrFactorization<T>> f;
  double t_f = 0;
  for (int run = 0; run < c.runs; ++run) {
    HodlrMatrix<T> copy = h;
    f.reset();
    evict_caches();
    const auto t0 = Clock::now();
    f.emplace(factorize(std::move(copy), variant, exec));
    t_f += seconds_since(t0);
  }
  Matrix<T> x;
  SolveStats stats;
  double t_s = 0;
  for (int run = 0; run < c.runs; ++run) {
    evict_caches();
    const auto t0 = Clock::now();
    x = solve(*f, b, &stats, exec);
    t_s += seconds_since(t0);
  }

  Record r;
  r.problem = to_string(cell.problem);
  r.n = cell.n;
  r.levels = static_cast<int>(L);
  r.leaf_size = c.leaf_size;
  r.tol = cell.tol;
  r.precision = to_string(cell.precision);
  r.variant = to_string(variant);
  r.t_f_seconds = t_f / c.runs;
  r.t_s_seconds = t_s / c.runs;
  r.mem_bytes = mem;
  r.relres = oracle::relative_residual<D>(*exact, x.template cast<D>(), b_exact, exec);
  r.flops_factor = f->flops().total();
  r.flops_solve = stats.total_flops();
  for (int l = 1; l <= L; ++l) r.ranks.push_back(h.max_rank(l));
  return r;
}

}  // namespace

Record run_cell(const Config& c, const Cell& cell) {
  try {
    const bool single = cell.precision == Precision::single;
    using C = std::complex<double>;
    switch (cell.problem) {
      case Problem::rpy: {
        auto a = std::make_shared<RpyOracle>(PointSet1D::uniform(cell.n, c.seed), RpyParams{});
        return single ? run_typed<float, double>(c, cell, a) : run_typed<double, double>(c, cell, a);
      }
      case Problem::laplace: {
        auto a = std::make_shared<LaplaceDoubleLayerOracle>(contour_default(cell.n));
        return single ? run_typed<float, double>(c, cell, a) : run_typed<double, double>(c, cell, a);
      }
      case Problem::helmholtz: {
        auto a = std::make_shared<HelmholtzCombinedOracle>(contour_default(cell.n), c.kappa, c.eta);
        return single ? run_typed<std::complex<float>, C>(c, cell, a)
                      : run_typed<C, C>(c, cell, a);
      }
    }
  } catch (const SingularBlockError& e) {
    throw CellError(std::string("singular block: ") + e.what());
  } catch (const NonFiniteEntryError& e) {
    throw CellError(e.what());
  }
  throw std::logic_error("run_cell: unknown problem");
}

void write_header(std::ostream& out, Format f) {
  if (f == Format::csv) out << kCsvHeader << '\n';
}

void write_record(std::ostream& out, const Record& r, Format f) {
  if (f == Format::csv) {
    out << r.problem << ',' << r.n << ',' << r.levels << ',' << r.leaf_size << ','
        << format_real(r.tol) << ',' << r.precision << ',' << r.variant << ','
        << format_real(r.t_f_seconds) << ',' << format_real(r.t_s_seconds) << ',' << r.mem_bytes
        << ',' << format_real(r.relres) << ',' << r.flops_factor << ',' << r.flops_solve << ','
        << join_ranks(r.ranks) << '\n';
    return;
  }
  nlohmann::ordered_json j;
  j["problem"] = r.problem;
  j["N"] = r.n;
  j["L"] = r.levels;
  j["leaf_size"] = r.leaf_size;
  j["tol"] = r.tol;
  j["precision"] = r.precision;
  j["variant"] = r.variant;
  j["t_f_seconds"] = r.t_f_seconds;
  j["t_s_seconds"] = r.t_s_seconds;
  j["mem_bytes"] = r.mem_bytes;
  j["relres"] = r.relres;
  j["flops_factor"] = r.flops_factor;
  j["flops_solve"] = r.flops_solve;
  j["ranks"] = r.ranks;
  out << j.dump() << '\n';
}

void emit(std::ostream& out, const std::vector<Record>& records, Format f) {
  write_header(out, f);
  for (const auto& r : records) write_record(out, r, f);
}

std::vector<Record> parse_records(std::istream& in, Format f) {
  std::vector<Record> out;
  std::string line;
  int lineno = 0;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error("results line " + std::to_string(lineno) + ": " + why);
  };
  if (f == Format::csv) {
    if (!std::getline(in, line) || trim(line) != kCsvHeader) {
      lineno = 1;
      fail("missing or wrong header");
    }
    lineno = 1;
  }
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    Record r;
    if (f == Format::jsonl) {
      const auto j = nlohmann::json::parse(line);
      r.problem = j.at("problem");
      r.n = j.at("N");
      r.levels = j.at("L");
      r.leaf_size = j.at("leaf_size");
      r.tol = j.at("tol");
      r.precision = j.at("precision");
      r.variant = j.at("variant");
      r.t_f_seconds = j.at("t_f_seconds");
      r.t_s_seconds = j.at("t_s_seconds");
      r.mem_bytes = j.at("mem_bytes");
      r.relres = j.at("relres");
      r.flops_factor = j.at("flops_factor");
      r.flops_solve = j.at("flops_solve");
      r.ranks = j.at("ranks").get<std::vector<Index>>();
      out.push_back(std::move(r));
      continue;
    }
    const auto fields = split(line, ',');
    if (fields.size() != 14) fail("expected 14 fields, got " + std::to_string(fields.size()));
    try {
      r.problem = fields[0];
      r.n = parse_integer<Index>("N", fields[1], lineno);
      r.levels = parse_integer<int>("L", fields[2], lineno);
      r.leaf_size = parse_integer<Index>("leaf_size", fields[3], lineno);
      r.tol = parse_real("tol", fields[4], lineno);
      r.precision = fields[5];
      r.variant = fields[6];
      r.t_f_seconds = parse_real("t_f_seconds", fields[7], lineno);
      r.t_s_seconds = parse_real("t_s_seconds", fields[8], lineno);
      r.mem_bytes = parse_integer<std::uint64_t>("mem_bytes", fields[9], lineno);
      r.relres = parse_real("relres", fields[10], lineno);
      r.flops_factor = parse_integer<std::uint64_t>("flops_factor", fields[11], lineno);
      r.flops_solve = parse_integer<std::uint64_t>("flops_solve", fields[12], lineno);
      if (!fields[13].empty()) {
        for (const auto& s : split(fields[13], '/')) r.ranks.push_back(parse_integer<Index>("ranks", s, lineno));
      }
    } catch (const ConfigError& e) {
      fail(e.what());
    }
    out.push_back(std::move(r));
  }
  return out;
}

}  // namespace hodlr::bench
