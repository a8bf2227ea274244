// Dense row-major tensor with value semantics. Single precision is the
// default carrier; double precision backs the verification paths.
#pragma once

#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "core/error.hpp"

namespace lvt {

using index_t = std::int64_t;

template <typename T>
class TensorT {
 public:
  TensorT() = default;

  /// Zero-filled tensor of the given shape.
  explicit TensorT(std::vector<index_t> shape)
      : shape_(std::move(shape)), data_(checked_numel(shape_), T(0)) {}

  TensorT(std::vector<index_t> shape, std::vector<T> data)
      : shape_(std::move(shape)), data_(std::move(data)) {
    if (static_cast<index_t>(data_.size()) != checked_numel(shape_)) {
      throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                       " does not match shape " + shape_string(shape_));
    }
  }

  static TensorT zeros(std::vector<index_t> shape) { return TensorT(std::move(shape)); }

  static TensorT full(std::vector<index_t> shape, T value) {
    TensorT t(std::move(shape));
    std::fill(t.data_.begin(), t.data_.end(), value);
    return t;
  }

  /// Identity matrix of extent n.
  static TensorT eye(index_t n) {
    TensorT t({n, n});
    for (index_t i = 0; i < n; ++i) t.data_[i * n + i] = T(1);
    return t;
  }

  const std::vector<index_t>& shape() const { return shape_; }
  index_t extent(std::size_t axis) const { return shape_.at(axis); }
  std::size_t rank() const { return shape_.size(); }
  index_t numel() const { return static_cast<index_t>(data_.size()); }
  bool empty() const { return data_.empty(); }

  T* data() { return data_.data(); }
  const T* data() const { return data_.data(); }
  std::vector<T>& vec() { return data_; }
  const std::vector<T>& vec() const { return data_; }

  T& operator[](index_t flat) { return data_[static_cast<std::size_t>(flat)]; }
  const T& operator[](index_t flat) const { return data_[static_cast<std::size_t>(flat)]; }

  template <typename... Ix>
  T& operator()(Ix... ix) {
    return data_[flat_index(ix...)];
  }
  template <typename... Ix>
  const T& operator()(Ix... ix) const {
    return data_[flat_index(ix...)];
  }

  bool same_shape(const TensorT& other) const { return shape_ == other.shape_; }

  std::string shape_str() const { return shape_string(shape_); }

  static std::string shape_string(const std::vector<index_t>& s) {
    std::ostringstream os;
    os << "[";
    for (std::size_t i = 0; i < s.size(); ++i) os << (i ? "x" : "") << s[i];
    os << "]";
    return os.str();
  }

 private:
  static index_t checked_numel(const std::vector<index_t>& shape) {
    index_t n = 1;
    for (index_t e : shape) {
      if (e <= 0) throw ShapeError("non-positive extent in shape " + shape_string(shape));
      if (n > (std::int64_t(1) << 40) / e) throw ShapeError("tensor too large: " + shape_string(shape));
      n *= e;
    }
    return n;
  }

  template <typename... Ix>
  std::size_t flat_index(Ix... ix) const {
    const index_t idx[] = {static_cast<index_t>(ix)...};
    std::size_t flat = 0;
    for (std::size_t a = 0; a < sizeof...(Ix); ++a) flat = flat * shape_[a] + idx[a];
    return flat;
  }

  std::vector<index_t> shape_;
  std::vector<T> data_;
};

using Tensor = TensorT<float>;
using Tensor64 = TensorT<double>;

/// Throws ValueError if any entry of t is NaN or infinite.
template <typename T>
void require_finite(const TensorT<T>& t, const char* op) {
  for (index_t i = 0; i < t.numel(); ++i) {
    if (!std::isfinite(t[i])) {
      throw ValueError(std::string(op) + ": non-finite value at flat index " + std::to_string(i));
    }
  }
}

}  // namespace lvt
