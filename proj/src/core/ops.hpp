// Tensor kernels: matrix products, grouped/dilated convolution, the
// unfold/fold lowering pair, softmax, layer norm and SiLU, together with
// the explicit backward passes the gradient checker drives.
//
// Every kernel is a pure function of its inputs, validates shapes up
// front, and checks its output for non-finite values. Reduction order is
// fixed, and parallel kernels partition output elements only, so results
// are bitwise identical across thread counts.
#pragma once

#include <optional>

#include "core/conv_spec.hpp"
#include "core/tensor.hpp"

namespace lvt {

/// a[m,k] @ b[k,n] -> [m,n].
template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b);

/// a[B,m,k] @ b[B,k,n] -> [B,m,n], slice-wise.
template <typename T>
TensorT<T> batched_matmul(const TensorT<T>& a, const TensorT<T>& b);

/// Max-subtracted softmax along `axis`.
template <typename T>
TensorT<T> softmax(const TensorT<T>& t, int axis);

/// Gradient given the softmax output y and upstream dy.
template <typename T>
TensorT<T> softmax_backward(const TensorT<T>& y, const TensorT<T>& dy, int axis);

/// Grouped dilated cross-correlation with zero padding.
/// x[C_in,H,W], w[C_out,C_in/g,k,k], optional bias[C_out] -> [C_out,H',W'].
template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>* bias,
                  const ConvSpec& spec);

template <typename T>
struct Conv2dGrads {
  TensorT<T> dx, dw, dbias;
};

template <typename T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, bool has_bias,
                               const ConvSpec& spec, const TensorT<T>& dy);

/// Sliding-window lowering: x[C,H,W] -> [L,k*k,C] with L = H'*W'.
/// Window l=(i,j) position q=(a,b) holds x[c, s*i-p+a*r, s*j-p+b*r], zero
/// outside the image.
template <typename T>
TensorT<T> unfold(const TensorT<T>& x, const ConvSpec& spec);

/// Adjoint of unfold: scatter-add window entries back to image layout.
/// Overlaps are summed; padding positions are discarded.
template <typename T>
TensorT<T> fold(const TensorT<T>& w, index_t out_h, index_t out_w, const ConvSpec& spec);

/// Per-vector normalization over the last axis, then affine with gamma/beta.
template <typename T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      double eps);

template <typename T>
struct LayerNormGrads {
  TensorT<T> dx, dgamma, dbeta;
};

template <typename T>
LayerNormGrads<T> layer_norm_backward(const TensorT<T>& x, const TensorT<T>& gamma, double eps,
                                      const TensorT<T>& dy);

/// Elementwise m * sigmoid(m).
template <typename T>
TensorT<T> silu(const TensorT<T>& x);

template <typename T>
TensorT<T> silu_backward(const TensorT<T>& x, const TensorT<T>& dy);

/// y = x @ w^T + b with x[N,in], w[out,in], optional b[out] -> [N,out].
template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>* bias);

template <typename T>
struct LinearGrads {
  TensorT<T> dx, dw, dbias;
};

template <typename T>
LinearGrads<T> linear_backward(const TensorT<T>& x, const TensorT<T>& w, bool has_bias,
                               const TensorT<T>& dy);

// Layout helpers and small elementwise utilities.

template <typename T>
TensorT<T> transpose2d(const TensorT<T>& a);

/// [C,H,W] -> [H*W,C] token matrix.
template <typename T>
TensorT<T> to_tokens(const TensorT<T>& map);

/// [N,C] tokens -> [C,H,W] with N == H*W.
template <typename T>
TensorT<T> to_map(const TensorT<T>& tokens, index_t channels, index_t height, index_t width);

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T factor);

template <typename T>
T dot(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
T max_abs_diff(const TensorT<T>& a, const TensorT<T>& b);

template <typename T>
T max_abs(const TensorT<T>& a);

}  // namespace lvt
