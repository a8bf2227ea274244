// Multi-head scaled dot-product attention over token matrices.
#pragma once

#include <cmath>

#include "core/ops.hpp"
#include "core/tensor.hpp"

namespace lvt {

struct AttentionConfig {
  int dim = 0;
  int heads = 1;

  int head_dim() const { return dim / heads; }
  double logit_scale() const { return 1.0 / std::sqrt(static_cast<double>(head_dim())); }

  void validate() const {
    if (dim <= 0 || heads <= 0 || dim % heads != 0) {
      throw ShapeError("attention config: dim " + std::to_string(dim) +
                       " not divisible by heads " + std::to_string(heads));
    }
  }
};

/// Per-head softmax(Q K^T * scale) V with heads concatenated.
/// q[N,d], k[M,d], v[M,d] -> [N,d].
template <typename T>
TensorT<T> scaled_dot_attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v,
                                const AttentionConfig& cfg);

/// Attention weights for one head: softmax(Q_h K_h^T * scale), rows sum to 1.
template <typename T>
TensorT<T> attention_weights(const TensorT<T>& q, const TensorT<T>& k, const AttentionConfig& cfg,
                             int head);

template <typename T>
struct AttentionGrads {
  TensorT<T> dq, dk, dv;
};

template <typename T>
AttentionGrads<T> scaled_dot_attention_backward(const TensorT<T>& q, const TensorT<T>& k,
                                                const TensorT<T>& v, const AttentionConfig& cfg,
                                                const TensorT<T>& dy);

}  // namespace lvt
