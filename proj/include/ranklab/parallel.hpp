#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace ranklab::parallel {

namespace detail {
inline std::atomic<unsigned>& max_threads_slot() {
  static std::atomic<unsigned> slot{1};
  return slot;
}
}  // namespace detail

/// Caps the worker count used by every parallel loop in the library.
/// Zero selects std::thread::hardware_concurrency().
inline void set_max_threads(unsigned n) {
  if (n == 0) n = std::max(1u, std::thread::hardware_concurrency());
  detail::max_threads_slot().store(n);
}

inline unsigned max_threads() { return detail::max_threads_slot().load(); }

/// Runs body(i) for i in [0, count). Each index is visited exactly once and
/// callers write results into per-index slots, so outputs do not depend on
/// the worker count. The first exception thrown by any worker (lowest
/// index wins) is rethrown on the calling thread.
template <typename Body>
void for_each_index(std::size_t count, Body&& body) {
  const std::size_t workers =
      std::min<std::size_t>(max_threads(), std::max<std::size_t>(count, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < count; ++i) body(i);
    return;
  }

  std::mutex error_mutex;
  std::exception_ptr first_error;
  std::size_t first_error_index = count;

  auto run_chunk = [&](std::size_t begin, std::size_t end) {
    for (std::size_t i = begin; i < end; ++i) {
      try {
        body(i);
      } catch (...) {
        std::lock_guard lock(error_mutex);
        if (i < first_error_index) {
          first_error_index = i;
          first_error = std::current_exception();
        }
        return;
      }
    }
  };

  const std::size_t chunk = (count + workers - 1) / workers;
  std::vector<std::jthread> pool;
  pool.reserve(workers);
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back(run_chunk, begin, end);
  }
  pool.clear();  // joins
  if (first_error) std::rethrow_exception(first_error);
}

}  // namespace ranklab::parallel
