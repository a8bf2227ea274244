// Deterministic random number generation. All distributions are hand-rolled
// on top of splitmix64 so that seeded draws are identical across platforms
// and standard-library versions.
#pragma once

#include <cmath>
#include <cstdint>

#include "core/tensor.hpp"

namespace lvt {

class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1).
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  /// Uniform in [lo, hi).
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Standard normal via Box-Muller.
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  /// Normal(0, std) with resampling outside two standard deviations.
  double trunc_normal(double stddev) {
    for (;;) {
      double z = normal();
      if (std::fabs(z) <= 2.0) return z * stddev;
    }
  }

  template <typename T>
  TensorT<T> uniform_tensor(std::vector<index_t> shape, double lo, double hi) {
    TensorT<T> t(std::move(shape));
    for (index_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(uniform(lo, hi));
    return t;
  }

  template <typename T>
  TensorT<T> trunc_normal_tensor(std::vector<index_t> shape, double stddev) {
    TensorT<T> t(std::move(shape));
    for (index_t i = 0; i < t.numel(); ++i) t[i] = static_cast<T>(trunc_normal(stddev));
    return t;
  }

 private:
  std::uint64_t state_;
};

/// Stable 64-bit FNV-1a hash, used to derive per-check seeds from names.
inline std::uint64_t hash64(const char* s) {
  std::uint64_t h = 1469598103934665603ull;
  for (; *s; ++s) {
    h ^= static_cast<unsigned char>(*s);
    h *= 1099511628211ull;
  }
  return h;
}

}  // namespace lvt
