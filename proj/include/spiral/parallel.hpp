#pragma once

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <functional>
#include <mutex>
#include <thread>
#include <vector>

namespace spiral {

/// Worker count: SPIRAL_THREADS if set and positive, otherwise the hardware
/// concurrency. Read on every call so tests can change it.
std::size_t thread_count();

/// Runs body(i) for every i in [0, n). Tasks are claimed in blocks from a
/// shared counter; callers write results into slot i so the merge order is the
/// input order regardless of scheduling. The first exception (lowest task
/// index) is rethrown after all workers have joined.
template <class Body>
void parallel_for(std::size_t n, Body&& body, std::size_t block = 64) {
  const std::size_t workers = std::min(thread_count(), (n + block - 1) / std::max<std::size_t>(block, 1));
  if (workers <= 1) {
    for (std::size_t i = 0; i < n; ++i) body(i);
    return;
  }
  std::atomic<std::size_t> next{0};
  std::mutex error_mutex;
  std::exception_ptr error;
  std::size_t error_index = n;
  auto run = [&] {
    for (;;) {
      const std::size_t start = next.fetch_add(block);
      if (start >= n) return;
      const std::size_t stop = std::min(n, start + block);
      for (std::size_t i = start; i < stop; ++i) {
        try {
          body(i);
        } catch (...) {
          std::lock_guard lock(error_mutex);
          if (i < error_index) {
            error_index = i;
            error = std::current_exception();
          }
        }
      }
    }
  };
  std::vector<std::thread> pool;
  pool.reserve(workers - 1);
  for (std::size_t w = 1; w < workers; ++w) pool.emplace_back(run);
  run();
  for (auto& t : pool) t.join();
  if (error) std::rethrow_exception(error);
}

/// True iff pred(i) holds for every i. Stops handing out work once a failure
/// is seen; the boolean result does not depend on scheduling.
template <class Pred>
bool parallel_all_of(std::size_t n, Pred&& pred, std::size_t block = 64) {
  std::atomic<bool> failed{false};
  parallel_for(
      n,
      [&](std::size_t i) {
        if (failed.load(std::memory_order_relaxed)) return;
        if (!pred(i)) failed.store(true, std::memory_order_relaxed);
      },
      block);
  return !failed.load();
}

}  // namespace spiral
