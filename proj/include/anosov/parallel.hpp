#pragma once
// Minimal chunked work scheduler.  Chunk boundaries depend only on the item
// count (never on the worker count), so any per-chunk outputs land in the
// same slots regardless of scheduling; combined with the fixed-order
// reductions in summation.hpp this makes every pipeline result reproducible
// across worker counts.

#include <algorithm>
#include <atomic>
#include <cstddef>
#include <exception>
#include <mutex>
#include <thread>
#include <vector>

namespace anosov {

inline int resolve_workers(int workers) {
  if (workers > 0) return workers;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

// fn(chunk_index, begin, end) over [0, n) split into chunks of size `chunk`.
template <typename Fn>
void parallel_chunks(std::size_t n, std::size_t chunk, int workers, Fn&& fn) {
  if (n == 0) return;
  if (chunk == 0) chunk = 1;
  std::size_t n_chunks = (n + chunk - 1) / chunk;
  int w = resolve_workers(workers);
  if (w <= 1 || n_chunks <= 1) {
    for (std::size_t c = 0; c < n_chunks; ++c)
      fn(c, c * chunk, std::min(n, (c + 1) * chunk));
    return;
  }
  std::atomic<std::size_t> next{0};
  std::atomic<bool> failed{false};
  std::exception_ptr first_error;
  std::mutex err_mutex;
  auto worker = [&]() {
    for (;;) {
      std::size_t c = next.fetch_add(1);
      if (c >= n_chunks || failed.load()) return;
      try {
        fn(c, c * chunk, std::min(n, (c + 1) * chunk));
      } catch (...) {
        std::lock_guard<std::mutex> lock(err_mutex);
        if (!failed.exchange(true)) first_error = std::current_exception();
        return;
      }
    }
  };
  std::vector<std::thread> threads;
  int n_threads = static_cast<int>(std::min<std::size_t>(w, n_chunks));
  threads.reserve(n_threads);
  for (int t = 0; t < n_threads; ++t) threads.emplace_back(worker);
  for (auto& t : threads) t.join();
  if (failed.load()) std::rethrow_exception(first_error);
}

}  // namespace anosov
