#pragma once

#include <cstdint>
#include <thread>
#include <vector>

namespace aoisched {

/// Number of workers actually used for a requested thread count (0 = auto).
inline int resolve_threads(int requested) {
  if (requested > 0) return requested;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : static_cast<int>(hw);
}

/// Runs fn(begin, end, worker) over a contiguous partition of [first, last).
/// Workers own disjoint ranges, so fn may write to per-index slots without
/// synchronization. Partition boundaries depend only on (first, last, threads).
template <typename Fn>
void parallel_for(std::uint64_t first, std::uint64_t last, int threads, Fn&& fn) {
  const std::uint64_t n = last > first ? last - first : 0;
  int workers = resolve_threads(threads);
  if (workers <= 1 || n < 2) {
    if (n > 0) fn(first, last, 0);
    return;
  }
  if (static_cast<std::uint64_t>(workers) > n) workers = static_cast<int>(n);
  std::vector<std::thread> pool;
  pool.reserve(static_cast<std::size_t>(workers));
  const std::uint64_t chunk = n / workers;
  const std::uint64_t extra = n % workers;
  std::uint64_t begin = first;
  for (int w = 0; w < workers; ++w) {
    std::uint64_t end = begin + chunk + (static_cast<std::uint64_t>(w) < extra ? 1 : 0);
    pool.emplace_back([&fn, begin, end, w] { fn(begin, end, w); });
    begin = end;
  }
  for (auto& t : pool) t.join();
}

}  // namespace aoisched
