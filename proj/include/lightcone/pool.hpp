#pragma once

// Worker pool for independent experiment points. Results are collected by
// task index, so the output order never depends on scheduling.

#include <atomic>
#include <cstdlib>
#include <exception>
#include <optional>
#include <string>
#include <thread>
#include <vector>

#include "lightcone/error.hpp"

namespace lightcone {

/// LIGHTCONE_LAB_THREADS, when set, overrides the requested job count.
inline int resolve_jobs(int requested) {
  if (const char* env = std::getenv("LIGHTCONE_LAB_THREADS"); env && *env) {
    char* end = nullptr;
    long v = std::strtol(env, &end, 10);
    require(end && *end == '\0' && v >= 1 && v <= 1024, errc::config,
            std::string("LIGHTCONE_LAB_THREADS must be a positive integer, got '") + env + "'");
    return int(v);
  }
  require(requested >= 1, errc::config, "--jobs must be at least 1");
  return requested;
}

/// out[i] = fn(i) for i < count, evaluated on up to `jobs` threads. The
/// exception of the lowest failing index is rethrown.
template <class Fn>
auto parallel_map(size_t count, int jobs, Fn&& fn) -> std::vector<decltype(fn(size_t{}))> {
  using R = decltype(fn(size_t{}));
  std::vector<std::optional<R>> slots(count);
  std::vector<std::exception_ptr> errors(count);
  std::atomic<size_t> next{0};
  auto worker = [&] {
    for (size_t i; (i = next.fetch_add(1)) < count;) {
      try {
        slots[i].emplace(fn(i));
      } catch (...) {
        errors[i] = std::current_exception();
      }
    }
  };
  const size_t n = std::min<size_t>(size_t(std::max(jobs, 1)), std::max<size_t>(count, 1));
  if (n <= 1) {
    worker();
  } else {
    std::vector<std::thread> threads;
    for (size_t k = 0; k < n; ++k) threads.emplace_back(worker);
    for (auto& t : threads) t.join();
  }
  for (auto& e : errors)
    if (e) std::rethrow_exception(e);
  std::vector<R> out;
  out.reserve(count);
  for (auto& s : slots) out.push_back(std::move(*s));
  return out;
}

}  // namespace lightcone
