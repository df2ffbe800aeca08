#include "hodlr/executor.hpp"

#include <cstdlib>
#include <stdexcept>
#include <thread>

namespace hodlr {

Executor Executor::threads(int count) {
  if (count < 1) throw std::invalid_argument("executor: thread count must be >= 1");
  Executor e;
  e.threads_ = count;
  return e;
}

Executor Executor::parse(const std::string& spec) {
  if (spec == "serial") return serial();
  if (spec == "threads") {
    const unsigned hw = std::thread::hardware_concurrency();
    return threads(hw == 0 ? 1 : static_cast<int>(hw));
  }
  const std::string prefix = "threads:";
  if (spec.rfind(prefix, 0) == 0) {
    const std::string rest = spec.substr(prefix.size());
    std::size_t used = 0;
    int k = 0;
    try {
      k = std::stoi(rest, &used);
    } catch (const std::exception&) {
      used = 0;
    }
    if (used == 0 || used != rest.size() || k < 1) {
      throw std::invalid_argument("executor: bad thread count in '" + spec + "'");
    }
    return threads(k);
  }
  throw std::invalid_argument("executor: expected serial, threads or threads:<k>, got '" + spec + "'");
}

Executor Executor::from_env() {
  const char* v = std::getenv("HODLR_EXECUTOR");
  if (v == nullptr || *v == '\0') return serial();
  return parse(v);
}

std::string Executor::describe() const {
  return threads_ <= 1 ? std::string("serial") : "threads:" + std::to_string(threads_);
}

}  // namespace hodlr
