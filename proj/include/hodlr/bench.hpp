#pragma once

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "hodlr/types.hpp"

// Benchmark cells: configuration, execution and result records.

namespace hodlr::bench {

/// Bad configuration text or value. line() is 0 for overrides given on the
/// command line.
class ConfigError : public std::runtime_error {
 public:
  ConfigError(const std::string& what, int line, std::string key)
      : std::runtime_error(what), line_(line), key_(std::move(key)) {}
  int line() const { return line_; }
  const std::string& key() const { return key_; }

 private:
  int line_;
  std::string key_;
};

/// A cell could not be run: singular block, non-finite entry, or memory budget.
class CellError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

enum class Problem { rpy, laplace, helmholtz };
enum class Precision { single, double_ };

struct Config {
  std::vector<Problem> problems{Problem::rpy};
  std::vector<Index> sizes{4096};
  std::vector<double> tols{1e-12};
  std::vector<Precision> precisions{Precision::double_};
  Index leaf_size = 64;
  Index max_rank = -1;
  std::string compression = "aca_rook_pivot";
  double kappa = 20;
  double eta = 20;
  std::uint64_t seed = 1;
  std::string executor = "serial";
  int large_gemm_levels = 3;
  std::string k_variant = "pivoted_standard";
  int runs = 5;
  /// Refuse cells whose predicted storage exceeds this many bytes.
  std::uint64_t memory_budget = std::uint64_t{8} << 30;

  /// Applies one key=value pair; `line` is only used for diagnostics.
  void set(const std::string& key, const std::string& value, int line = 0);
};

/// Flat key = value text, '#' starts a comment. Unknown or repeated keys
/// are errors. Grammar in README.md, "Config format".
Config parse_config(std::istream& in);
Config parse_config_file(const std::string& path);

std::string to_string(Problem p);
std::string to_string(Precision p);
Problem parse_problem(const std::string& s);
Precision parse_precision(const std::string& s);

struct Record {
  std::string problem;
  Index n = 0;
  int levels = 0;
  Index leaf_size = 0;
  double tol = 0;
  std::string precision;
  std::string variant;
  double t_f_seconds = 0;
  double t_s_seconds = 0;
  std::uint64_t mem_bytes = 0;
  double relres = 0;
  std::uint64_t flops_factor = 0;
  std::uint64_t flops_solve = 0;
  /// Largest off-diagonal rank on each level 1..L.
  std::vector<Index> ranks;

  friend bool operator==(const Record&, const Record&) = default;
};

/// One (problem, n, tol, precision) cell.
struct Cell {
  Problem problem;
  Index n;
  double tol;
  Precision precision;
};

std::vector<Cell> cells(const Config& c);

/// Streams a buffer twice the last-level cache size so the next timed run
/// starts from memory. A single solve reads each factor byte once; without
/// this, back-to-back repetitions of small cells reuse a warm cache.
void evict_caches();

/// Timings average `runs` repetitions, each after evict_caches().
Record run_cell(const Config& c, const Cell& cell);

enum class Format { csv, jsonl };
Format parse_format(const std::string& s);

inline constexpr const char* kCsvHeader =
    "problem,N,L,leaf_size,tol,precision,variant,t_f_seconds,t_s_seconds,mem_bytes,relres,"
    "flops_factor,flops_solve,ranks";

/// Writes the CSV header (csv only) followed by one line per record.
void write_header(std::ostream& out, Format f);
void write_record(std::ostream& out, const Record& r, Format f);
void emit(std::ostream& out, const std::vector<Record>& records, Format f);
std::vector<Record> parse_records(std::istream& in, Format f);

}  // namespace hodlr::bench
