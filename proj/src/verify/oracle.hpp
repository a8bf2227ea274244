// Reference implementations by direct nested loops — no lowering tricks, no
// shared kernel code with the fast paths. Restricted to desk-scale shapes
// (H, W <= 16 and d <= 16) so the quadratic/quintuple loops stay cheap.
#pragma once

#include "core/conv_spec.hpp"
#include "core/tensor.hpp"
#include "nn/attention.hpp"
#include "nn/csa.hpp"
#include "nn/rasa.hpp"

namespace lvt {

/// Grouped dilated convolution by direct summation.
template <typename T>
TensorT<T> oracle_conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>* bias,
                         const ConvSpec& spec);

/// Multi-head scaled dot-product attention with a hand-rolled softmax.
template <typename T>
TensorT<T> oracle_attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v,
                            const AttentionConfig& cfg);

/// Window-by-window evaluation: per-position projections, center-predicted
/// weights, scatter-add to the input extents, output projection.
template <typename T>
TensorT<T> oracle_csa(const TensorT<T>& x, const CsaParamsT<T>& p,
                      const TensorT<T>* alpha_override = nullptr);

/// Windowed attention with ONE value projection per head (reads the
/// position-0 filter matrix): the reference the tied-filter CSA must match.
template <typename T>
TensorT<T> oracle_windowed_attention(const TensorT<T>& x, const CsaParamsT<T>& p);

/// Full atrous self-attention by direct loops: 1x1 query projection, three
/// dilated depthwise branches, reduction, attention, output projection.
template <typename T>
TensorT<T> oracle_asa(const TensorT<T>& x, const AsaParamsT<T>& p);

}  // namespace lvt
