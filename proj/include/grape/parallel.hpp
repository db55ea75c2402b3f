#pragma once

#include <algorithm>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace grape {

/// Static block partition of [0, count) over `threads` workers. Every index
/// writes only its own output slot, so results do not depend on the thread
/// count. threads <= 0 means hardware concurrency.
template <typename Body>
void parallel_for(int count, int threads, Body&& body) {
  if (count <= 0) return;
  int n_threads = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
  n_threads = std::clamp(n_threads, 1, count);
  if (n_threads == 1) {
    for (int i = 0; i < count; ++i) body(i);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(n_threads));
  std::exception_ptr error;
  std::mutex error_mutex;
  const int chunk = (count + n_threads - 1) / n_threads;
  for (int t = 0; t < n_threads; ++t) {
    const int begin = t * chunk;
    const int end = std::min(count, begin + chunk);
    if (begin >= end) break;
    pool.emplace_back([&, begin, end] {
      try {
        for (int i = begin; i < end; ++i) body(i);
      } catch (...) {
        std::lock_guard<std::mutex> lock(error_mutex);
        if (!error) error = std::current_exception();
      }
    });
  }
  for (auto& worker : pool) worker.join();
  if (error) std::rethrow_exception(error);
}

}  // namespace grape
