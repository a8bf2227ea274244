// Shared building blocks: spatial reduction for the attention K/V path,
// the depthwise-conv feed-forward block, and overlapped patch embedding.
#pragma once

#include "core/conv_spec.hpp"
#include "core/ops.hpp"
#include "core/tensor.hpp"

namespace lvt {

/// Epsilon used by every layer norm in the network.
inline constexpr double kLayerNormEps = 1e-5;

/// Token-grid downsampling for keys/values: strided conv k=R, s=R followed
/// by layer norm. ratio == 1 bypasses both and just flattens to tokens.
template <typename T>
struct SrParamsT {
  int dim = 0;
  int ratio = 1;
  TensorT<T> proj_w;  // [d, d, R, R]
  TensorT<T> proj_b;  // [d]
  TensorT<T> gamma;   // [d]
  TensorT<T> beta;    // [d]

  void validate() const;
  index_t param_count() const;
};

/// x[d,H,W] -> [ceil(H/R)*ceil(W/R), d] tokens. H and W are zero-padded on
/// the bottom/right to the next multiple of R when R does not divide them.
template <typename T>
TensorT<T> spatial_reduction(const TensorT<T>& x, const SrParamsT<T>& p);

template <typename T>
struct SrGrads {
  TensorT<T> dx, dproj_w, dproj_b, dgamma, dbeta;
};

template <typename T>
SrGrads<T> spatial_reduction_backward(const TensorT<T>& x, const SrParamsT<T>& p,
                                      const TensorT<T>& dy);

/// Feed-forward block: 1x1 expand to hidden -> depthwise 3x3 (p=1) -> SiLU
/// -> 1x1 project back to d. The residual add belongs to the caller.
template <typename T>
struct MixFfnParamsT {
  int dim = 0;
  int hidden = 0;
  TensorT<T> fc1_w;  // [hidden, d]
  TensorT<T> fc1_b;  // [hidden]
  TensorT<T> dw_w;   // [hidden, 1, 3, 3]
  TensorT<T> dw_b;   // [hidden]
  TensorT<T> fc2_w;  // [d, hidden]
  TensorT<T> fc2_b;  // [d]

  void validate() const;
  index_t param_count() const;
};

template <typename T>
TensorT<T> mix_ffn(const TensorT<T>& x, const MixFfnParamsT<T>& p);

/// Strided conv with kernel larger than stride, then layer norm over
/// channels at each spatial position.
template <typename T>
struct PatchEmbedParamsT {
  int in_dim = 0;
  int out_dim = 0;
  ConvSpec spec;      // k7 s4 p3 at the stem, k3 s2 p1 between stages
  TensorT<T> proj_w;  // [out, in, k, k]
  TensorT<T> proj_b;  // [out]
  TensorT<T> gamma;   // [out]
  TensorT<T> beta;    // [out]

  void validate() const;
  index_t param_count() const;
};

template <typename T>
TensorT<T> patch_embed(const TensorT<T>& x, const PatchEmbedParamsT<T>& p);

/// Zero-pad a [C,H,W] map on the bottom/right so both extents become
/// multiples of `multiple`. Returns the input unchanged if they already are.
template <typename T>
TensorT<T> pad_to_multiple(const TensorT<T>& x, index_t multiple);

/// Crop a [C,H,W] map to the top-left h×w region.
template <typename T>
TensorT<T> crop_map(const TensorT<T>& x, index_t h, index_t w);

}  // namespace lvt
