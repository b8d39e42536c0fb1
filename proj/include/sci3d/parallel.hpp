#pragma once

#include <algorithm>
#include <cstddef>
#include <functional>
#include <thread>
#include <vector>

namespace sci3d {

/// Splits [0, n) into at most num_threads contiguous chunks and runs
/// fn(begin, end, chunk_index) on each. Chunk boundaries depend only on
/// (n, num_threads), so any reduction that merges per-chunk results in
/// chunk order is deterministic regardless of scheduling.
inline void parallel_chunks(std::size_t n, int num_threads,
                            const std::function<void(std::size_t, std::size_t, int)>& fn) {
  if (n == 0) return;
  int chunks = std::max(1, num_threads);
  chunks = static_cast<int>(std::min<std::size_t>(chunks, n));
  if (chunks == 1) {
    fn(0, n, 0);
    return;
  }
  const std::size_t per = (n + chunks - 1) / chunks;
  std::vector<std::thread> workers;
  workers.reserve(chunks);
  for (int c = 0; c < chunks; ++c) {
    const std::size_t begin = per * c;
    const std::size_t end = std::min(n, begin + per);
    if (begin >= end) break;
    workers.emplace_back(fn, begin, end, c);
  }
  for (auto& w : workers) w.join();
}

inline int default_thread_count() {
  const unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(std::min(hw, 8u));
}

}  // namespace sci3d
