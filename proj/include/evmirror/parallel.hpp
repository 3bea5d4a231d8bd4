#pragma once

#include <cstddef>
#include <thread>
#include <vector>

namespace evmirror {

/// 0 means "use all hardware threads".
inline unsigned resolve_threads(unsigned requested) {
  if (requested != 0) return requested;
  const unsigned hw = std::thread::hardware_concurrency();
  return hw ? hw : 1;
}

/// Runs body(worker, begin, end) over contiguous index chunks. Chunk
/// boundaries depend only on (n, threads); with per-index random streams the
/// work itself must be index-addressed, so results cannot depend on the split.
template <class Body>
void parallel_for_indexed(std::size_t n, unsigned threads, Body&& body) {
  threads = resolve_threads(threads);
  if (threads <= 1 || n < 2 * threads) {
    body(0u, std::size_t{0}, n);
    return;
  }
  std::vector<std::thread> pool;
  pool.reserve(threads);
  for (unsigned t = 0; t < threads; ++t) {
    const std::size_t begin = n * t / threads;
    const std::size_t end = n * (t + 1) / threads;
    pool.emplace_back([&body, t, begin, end] { body(t, begin, end); });
  }
  for (auto& th : pool) th.join();
}

template <class Body>
void parallel_for(std::size_t n, unsigned threads, Body&& body) {
  parallel_for_indexed(n, threads,
                       [&body](unsigned, std::size_t begin, std::size_t end) { body(begin, end); });
}

}  // namespace evmirror
