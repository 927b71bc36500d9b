#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mixsl {

namespace detail {
inline std::atomic<int>& thread_count() {
  static std::atomic<int> n{1};
  return n;
}
}  // namespace detail

/// Number of worker threads used by line/slice sweeps. 1 is the
/// determinism reference.
inline void set_num_threads(int n) { detail::thread_count() = std::max(1, n); }
inline int num_threads() { return detail::thread_count(); }

/// Calls fn(begin, end) on disjoint contiguous chunks of [0, count).
/// Callers must only write to data owned by their chunk.
template <class Fn>
void parallel_for(std::size_t count, Fn&& fn) {
  const auto workers =
      std::min<std::size_t>(static_cast<std::size_t>(num_threads()), count);
  if (workers <= 1) {
    if (count > 0) fn(std::size_t{0}, count);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mutex;
  const std::size_t chunk = (count + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t b = w * chunk;
    const std::size_t e = std::min(count, b + chunk);
    if (b >= e) break;
    pool.emplace_back([&, b, e] {
      try {
        fn(b, e);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mixsl
