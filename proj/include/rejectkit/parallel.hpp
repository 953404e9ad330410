#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace rejectkit {

// Runs fn(i) for i in [0, n). Each item must write only to its own
// index-addressed slot, which makes the result independent of the thread
// count; callers rely on --threads N being bit-identical to --threads 1.
template <typename Fn>
void parallel_for(std::size_t n, unsigned threads, Fn&& fn) {
  if (threads <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  unsigned workers = threads;
  if (workers > n) workers = static_cast<unsigned>(n);
  std::vector<std::thread> pool;
  pool.reserve(workers);
  for (unsigned w = 0; w < workers; ++w) {
    pool.emplace_back([&, w] {
      for (std::size_t i = w; i < n; i += workers) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace rejectkit
