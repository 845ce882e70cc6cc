#pragma once

#include <algorithm>
#include <cstddef>
#include <thread>
#include <vector>

namespace seeopt {

/// Fixed-partition parallel loop over [0, n). fn(i) may only write to state
/// owned by index i; reductions are the caller's job and must run in index
/// order so results do not depend on the worker count.
template <class F>
void parallel_for(std::size_t n, int workers, F&& fn) {
  if (workers <= 1 || n < 2) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  const std::size_t nw = std::min<std::size_t>(static_cast<std::size_t>(workers), n);
  const std::size_t chunk = (n + nw - 1) / nw;
  std::vector<std::thread> pool;
  pool.reserve(nw);
  for (std::size_t w = 0; w < nw; ++w) {
    const std::size_t lo = w * chunk;
    const std::size_t hi = std::min(n, lo + chunk);
    if (lo >= hi) break;
    pool.emplace_back([lo, hi, &fn] {
      for (std::size_t i = lo; i < hi; ++i) fn(i);
    });
  }
  for (auto& t : pool) t.join();
}

}  // namespace seeopt
