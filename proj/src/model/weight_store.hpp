// Ordered, named tensor container with a bit-exact file format:
//   magic "LVTW" | version u32 LE | tensor count u32 LE
//   per tensor: name length u16 LE | UTF-8 name | rank u8 |
//               extents u64 LE each | dtype u8 (0 = f32 LE) |
//               raw element data | CRC32 of the data bytes, u32 LE
// Bad structure raises FormatError; a data/CRC mismatch raises ChecksumError.
#pragma once

#include <cstdint>
#include <string>
#include <unordered_map>
#include <vector>

#include "core/tensor.hpp"

namespace lvt {

class WeightStore {
 public:
  static constexpr std::uint32_t kVersion = 1;

  /// Registers a tensor; names must be unique.
  void put(const std::string& name, Tensor t);

  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  /// Names in registration order.
  const std::vector<std::string>& names() const { return order_; }
  std::size_t size() const { return order_.size(); }

  /// Sum of element counts over all tensors.
  index_t total_params() const;

  void save(const std::string& path) const;
  static WeightStore load(const std::string& path);

 private:
  std::vector<std::string> order_;
  std::unordered_map<std::string, Tensor> index_;
};

/// Convenience for activation dumps: one tensor in the same file format.
void save_tensor_file(const Tensor& t, const std::string& name, const std::string& path);

}  // namespace lvt
