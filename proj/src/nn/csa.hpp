// Convolutional self-attention: a sliding-window layer where every relative
// window position j owns its own projection matrix and the summation weights
// are predicted from the window-center feature. With weights frozen at one it
// degenerates to a strided convolution; with all projections tied it
// degenerates to windowed attention.
#pragma once

#include <optional>

#include "core/conv_spec.hpp"
#include "core/tensor.hpp"

namespace lvt {

template <typename T>
struct CsaParamsT {
  int dim = 0;
  int heads = 1;
  int kernel = 3;
  int stride = 2;
  // Normalize predicted weights by raw-sum division instead of the stable
  // exponential form. Undefined for rows summing to ~0; off by default.
  bool raw_division = false;

  TensorT<T> w_filter;  // [k*k, heads, d_h, d_h] position-specific projections
  TensorT<T> w_qk;      // [heads*k^4, d] window-center -> attention scores
  TensorT<T> w_out;     // [d, d] head-mixing output projection

  int head_dim() const { return dim / heads; }
  int padding() const { return (kernel - 1) / 2; }
  void validate() const;
  index_t param_count() const;
};

/// Per-window attention matrices from the window-center features.
/// centers[L,d] -> [L, heads, k^2, k^2]; every row lies in the simplex
/// (exponential normalization) or sums to 1 by raw division when configured.
template <typename T>
TensorT<T> csa_alpha(const TensorT<T>& centers, const CsaParamsT<T>& p);

/// x[d,H,W] -> [d,H,W]. Unfold with stride 2, per-position projections,
/// weighted summation under the predicted alpha, fold back to the input
/// extents, output projection. `alpha_override` (test hook) substitutes
/// caller-supplied weights for the predicted, normalized alpha.
template <typename T>
TensorT<T> csa_forward(const TensorT<T>& x, const CsaParamsT<T>& p,
                       const TensorT<T>* alpha_override = nullptr);

template <typename T>
struct CsaGrads {
  TensorT<T> dx, dw_filter, dw_qk, dw_out;
};

/// Analytic gradients of csa_forward for the input and all parameters.
/// When alpha_override is supplied the prediction path receives no gradient.
template <typename T>
CsaGrads<T> csa_backward(const TensorT<T>& x, const CsaParamsT<T>& p, const TensorT<T>& dy,
                         const TensorT<T>* alpha_override = nullptr);

}  // namespace lvt
