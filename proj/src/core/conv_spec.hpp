// Convolution geometry shared by conv2d, unfold and fold.
#pragma once

#include <string>

#include "core/error.hpp"
#include "core/tensor.hpp"

namespace lvt {

struct ConvSpec {
  int kernel = 1;
  int stride = 1;
  int padding = 0;
  int dilation = 1;
  int groups = 1;

  /// floor((in + 2p - r*(k-1) - 1)/s) + 1; throws if non-positive.
  index_t out_extent(index_t in) const {
    validate();
    index_t span = in + 2 * padding - static_cast<index_t>(dilation) * (kernel - 1) - 1;
    if (span < 0) {
      throw ShapeError("conv output extent non-positive for input " + std::to_string(in) +
                       " with k=" + std::to_string(kernel) + " s=" + std::to_string(stride) +
                       " p=" + std::to_string(padding) + " r=" + std::to_string(dilation));
    }
    return span / stride + 1;
  }

  void validate() const {
    if (kernel < 1 || stride < 1 || dilation < 1 || groups < 1 || padding < 0) {
      throw ShapeError("invalid conv spec: k=" + std::to_string(kernel) +
                       " s=" + std::to_string(stride) + " p=" + std::to_string(padding) +
                       " r=" + std::to_string(dilation) + " g=" + std::to_string(groups));
    }
  }

  /// Resolution-preserving padding for odd kernels: p = r*(k-1)/2.
  static int same_padding(int kernel, int dilation) { return dilation * (kernel - 1) / 2; }
};

}  // namespace lvt
