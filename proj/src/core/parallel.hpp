// Thread-count control and a static-partition parallel loop.
//
// Work is always split into contiguous index ranges and every output element
// is written by exactly one range, so results are bitwise identical for any
// thread count. LVT_DETERMINISTIC=1 in the environment pins execution to a
// single thread regardless of the configured count.
#pragma once

#include <algorithm>
#include <cstdint>
#include <functional>
#include <thread>
#include <vector>

#include "core/tensor.hpp"

namespace lvt {

/// Requested worker count (>= 1). Default is 1.
void set_num_threads(int n);
int num_threads();

/// True when LVT_DETERMINISTIC=1 is set in the environment.
bool deterministic_mode();

/// Threads actually used: 1 in deterministic mode, else the configured count.
int effective_threads();

namespace detail {
void run_partitioned(index_t n, const std::function<void(index_t, index_t)>& body);
}

/// Invokes body(begin, end) over a static partition of [0, n).
template <typename F>
void parallel_for(index_t n, F&& body) {
  if (n <= 0) return;
  int t = effective_threads();
  if (t <= 1 || n == 1) {
    body(index_t(0), n);
    return;
  }
  std::function<void(index_t, index_t)> fn = std::forward<F>(body);
  detail::run_partitioned(n, fn);
}

}  // namespace lvt
