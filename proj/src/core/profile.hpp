// Global multiply-accumulate counter. Every compute kernel adds the MAC
// count it is defined to perform (one MAC per multiply-add, padding taps
// included), which lets the analytic FLOPs estimator be cross-checked
// against an actual forward pass.
#pragma once

#include <atomic>
#include <cstdint>

namespace lvt {

namespace detail {
inline std::atomic<std::uint64_t>& mac_counter() {
  static std::atomic<std::uint64_t> c{0};
  return c;
}
}  // namespace detail

inline void mac_count_add(std::uint64_t macs) {
  detail::mac_counter().fetch_add(macs, std::memory_order_relaxed);
}

inline std::uint64_t mac_count_read() { return detail::mac_counter().load(); }

inline void mac_count_reset() { detail::mac_counter().store(0); }

}  // namespace lvt
