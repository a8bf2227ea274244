#include "core/parallel.hpp"

#include <atomic>
#include <cstdlib>
#include <cstring>

namespace lvt {

namespace {
std::atomic<int> g_threads{1};
}

void set_num_threads(int n) { g_threads.store(n < 1 ? 1 : n); }

int num_threads() { return g_threads.load(); }

bool deterministic_mode() {
  const char* v = std::getenv("LVT_DETERMINISTIC");
  return v != nullptr && std::strcmp(v, "1") == 0;
}

int effective_threads() { return deterministic_mode() ? 1 : g_threads.load(); }

namespace detail {

void run_partitioned(index_t n, const std::function<void(index_t, index_t)>& body) {
  int t = std::min<index_t>(effective_threads(), n);
  index_t chunk = (n + t - 1) / t;
  std::vector<std::thread> workers;
  workers.reserve(t - 1);
  for (int w = 1; w < t; ++w) {
    index_t begin = w * chunk;
    index_t end = std::min(n, begin + chunk);
    if (begin >= end) break;
    workers.emplace_back([&body, begin, end] { body(begin, end); });
  }
  body(0, std::min(n, chunk));
  for (auto& w : workers) w.join();
}

}  // namespace detail

}  // namespace lvt
