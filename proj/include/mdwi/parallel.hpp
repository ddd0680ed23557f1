#pragma once

#include <algorithm>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace mdwi {

/// Worker count: an explicit positive request wins, then the
/// MANIFOLD_DWI_THREADS environment variable, then hardware concurrency.
int resolve_threads(int requested = 0);

/// Process-wide default used by parallel_for when no count is given.
void set_default_threads(int threads);
int default_threads();

/// Calls f(i) for every i in [0, n) on up to `threads` workers with static
/// contiguous chunks. Results are independent of the thread count as long
/// as f(i) only writes state owned by index i.
template <typename F>
void parallel_for(std::size_t n, F&& f, int threads = default_threads()) {
  const std::size_t workers = std::min<std::size_t>(static_cast<std::size_t>(std::max(threads, 1)), n);
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) f(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(workers);
  std::exception_ptr error;
  std::mutex error_mutex;
  const std::size_t chunk = (n + workers - 1) / workers;
  for (std::size_t w = 0; w < workers; ++w) {
    const std::size_t begin = w * chunk;
    const std::size_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&f, &error, &error_mutex, begin, end] {
      try {
        for (std::size_t i = begin; i < end; ++i) f(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace mdwi
