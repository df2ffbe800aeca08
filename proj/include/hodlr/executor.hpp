#pragma once

#include <exception>
#include <mutex>
#include <string>

#include "hodlr/types.hpp"

namespace hodlr {

/// Runs independent batch items either serially or on a fixed number of
/// threads. Per-item arithmetic never depends on the executor, so serial and
/// threaded runs produce bit-identical buffers.
class Executor {
 public:
  Executor() = default;

  static Executor serial() { return Executor(); }
  static Executor threads(int count);
  /// "serial", "threads" (all hardware threads) or "threads:<k>".
  static Executor parse(const std::string& spec);
  /// Reads HODLR_EXECUTOR; serial when unset.
  static Executor from_env();

  int thread_count() const { return threads_; }
  std::string describe() const;

  /// Levels 0..large_gemm_levels-1 dispatch their GEMMs as independent large
  /// calls rather than one batched call.
  int large_gemm_levels() const { return large_gemm_levels_; }
  Executor& set_large_gemm_levels(int levels) {
    large_gemm_levels_ = levels;
    return *this;
  }
  /// Lets a large GEMM split its output tile-wise across threads.
  bool inner_parallel() const { return inner_parallel_; }
  Executor& set_inner_parallel(bool on) {
    inner_parallel_ = on;
    return *this;
  }

  /// Calls f(i) for i in [0, count). If items throw, the exception of the
  /// lowest-indexed failing item is rethrown after all items finish.
  template <class F>
  void parallel_for(Index count, F&& f) const {
    if (threads_ <= 1 || count <= 1) {
      for (Index i = 0; i < count; ++i) f(i);
      return;
    }
    std::exception_ptr error;
    Index error_index = count;
    std::mutex error_mutex;
#pragma omp parallel for schedule(dynamic, 1) num_threads(threads_)
    for (Index i = 0; i < count; ++i) {
      try {
        f(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < error_index) {
          error_index = i;
          error = std::current_exception();
        }
      }
    }
    if (error) std::rethrow_exception(error);
  }

 private:
  int threads_ = 1;
  int large_gemm_levels_ = 3;
  bool inner_parallel_ = false;
};

}  // namespace hodlr
