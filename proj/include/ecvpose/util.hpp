#pragma once

#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

namespace ecvpose {

inline int resolve_threads(int threads) {
  if (threads > 0) return threads;
  unsigned hw = std::thread::hardware_concurrency();
  return hw == 0 ? 1 : int(hw);
}

/// Runs fn(begin, end) over a partition of [0, count). The partition depends
/// only on count and the resolved thread count, never on scheduling.
inline void parallel_for(size_t count, int threads, const std::function<void(size_t, size_t)>& fn) {
  const int t = resolve_threads(threads);
  if (t <= 1 || count < 2) {
    fn(0, count);
    return;
  }
  const size_t chunks = std::min(size_t(t), count);
  std::vector<std::thread> pool;
  pool.reserve(chunks);
  const size_t base = count / chunks, extra = count % chunks;
  size_t begin = 0;
  for (size_t c = 0; c < chunks; ++c) {
    const size_t end = begin + base + (c < extra ? 1 : 0);
    pool.emplace_back(fn, begin, end);
    begin = end;
  }
  for (auto& th : pool) th.join();
}

// splitmix64: portable stateless mixing, used where cross-run determinism of
// generated data matters more than statistical finesse.
inline uint64_t splitmix64(uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

/// Uniform double in [0, 1) from a hash state.
inline double hash_unit(uint64_t x) {
  return double(splitmix64(x) >> 11) * 0x1.0p-53;
}

}  // namespace ecvpose
