#include "nn/layers.hpp"

namespace lvt {

namespace {

template <typename T>
void check_map(const TensorT<T>& x, int dim, const char* who) {
  if (x.rank() != 3) throw ShapeError(std::string(who) + ": expected [C,H,W], got " + x.shape_str());
  if (x.extent(0) != dim) {
    throw ShapeError(std::string(who) + ": channel count " + std::to_string(x.extent(0)) +
                     " does not match configured dim " + std::to_string(dim));
  }
}

}  // namespace

template <typename T>
TensorT<T> pad_to_multiple(const TensorT<T>& x, index_t multiple) {
  if (x.rank() != 3) throw ShapeError("pad_to_multiple: expected [C,H,W], got " + x.shape_str());
  const index_t c = x.extent(0), h = x.extent(1), w = x.extent(2);
  const index_t ph = (multiple - h % multiple) % multiple;
  const index_t pw = (multiple - w % multiple) % multiple;
  if (ph == 0 && pw == 0) return x;
  TensorT<T> out({c, h + ph, w + pw});
  for (index_t ci = 0; ci < c; ++ci)
    for (index_t i = 0; i < h; ++i)
      for (index_t j = 0; j < w; ++j) out(ci, i, j) = x(ci, i, j);
  return out;
}

template <typename T>
TensorT<T> crop_map(const TensorT<T>& x, index_t h, index_t w) {
  if (x.rank() != 3) throw ShapeError("crop_map: expected [C,H,W], got " + x.shape_str());
  if (h > x.extent(1) || w > x.extent(2)) {
    throw ShapeError("crop_map: target " + std::to_string(h) + "x" + std::to_string(w) +
                     " exceeds " + x.shape_str());
  }
  if (h == x.extent(1) && w == x.extent(2)) return x;
  const index_t c = x.extent(0);
  TensorT<T> out({c, h, w});
  for (index_t ci = 0; ci < c; ++ci)
    for (index_t i = 0; i < h; ++i)
      for (index_t j = 0; j < w; ++j) out(ci, i, j) = x(ci, i, j);
  return out;
}

template <typename T>
void SrParamsT<T>::validate() const {
  if (dim <= 0 || ratio < 1) throw ShapeError("spatial reduction: bad dim/ratio");
  if (ratio == 1) return;
  const index_t d = dim, r = ratio;
  if (proj_w.rank() != 4 || proj_w.extent(0) != d || proj_w.extent(1) != d ||
      proj_w.extent(2) != r || proj_w.extent(3) != r) {
    throw ShapeError("spatial reduction: proj_w must be [d,d,R,R], got " + proj_w.shape_str());
  }
  if (proj_b.numel() != d || gamma.numel() != d || beta.numel() != d) {
    throw ShapeError("spatial reduction: bias/norm params must have extent d");
  }
}

template <typename T>
index_t SrParamsT<T>::param_count() const {
  if (ratio == 1) return 0;
  return proj_w.numel() + proj_b.numel() + gamma.numel() + beta.numel();
}

template <typename T>
TensorT<T> spatial_reduction(const TensorT<T>& x, const SrParamsT<T>& p) {
  p.validate();
  check_map(x, p.dim, "spatial_reduction");
  if (p.ratio == 1) return to_tokens(x);
  const TensorT<T> padded = pad_to_multiple(x, p.ratio);
  ConvSpec spec;
  spec.kernel = p.ratio;
  spec.stride = p.ratio;
  const TensorT<T> reduced = conv2d(padded, p.proj_w, &p.proj_b, spec);
  return layer_norm(to_tokens(reduced), p.gamma, p.beta, kLayerNormEps);
}

template <typename T>
SrGrads<T> spatial_reduction_backward(const TensorT<T>& x, const SrParamsT<T>& p,
                                      const TensorT<T>& dy) {
  p.validate();
  check_map(x, p.dim, "spatial_reduction_backward");
  if (p.ratio == 1) {
    SrGrads<T> g;
    g.dx = to_map(dy, x.extent(0), x.extent(1), x.extent(2));
    return g;
  }
  const TensorT<T> padded = pad_to_multiple(x, p.ratio);
  ConvSpec spec;
  spec.kernel = p.ratio;
  spec.stride = p.ratio;
  const TensorT<T> reduced = conv2d(padded, p.proj_w, &p.proj_b, spec);
  const TensorT<T> tokens = to_tokens(reduced);

  LayerNormGrads<T> ln = layer_norm_backward(tokens, p.gamma, kLayerNormEps, dy);
  const TensorT<T> dreduced =
      to_map(ln.dx, reduced.extent(0), reduced.extent(1), reduced.extent(2));
  Conv2dGrads<T> cv = conv2d_backward(padded, p.proj_w, true, spec, dreduced);

  SrGrads<T> g;
  g.dx = crop_map(cv.dx, x.extent(1), x.extent(2));
  g.dproj_w = std::move(cv.dw);
  g.dproj_b = std::move(cv.dbias);
  g.dgamma = std::move(ln.dgamma);
  g.dbeta = std::move(ln.dbeta);
  return g;
}

template <typename T>
void MixFfnParamsT<T>::validate() const {
  if (dim <= 0 || hidden <= 0) throw ShapeError("mix_ffn: bad dims");
  if (fc1_w.rank() != 2 || fc1_w.extent(0) != hidden || fc1_w.extent(1) != dim)
    throw ShapeError("mix_ffn: fc1_w must be [hidden,d], got " + fc1_w.shape_str());
  if (dw_w.rank() != 4 || dw_w.extent(0) != hidden || dw_w.extent(1) != 1 ||
      dw_w.extent(2) != 3 || dw_w.extent(3) != 3)
    throw ShapeError("mix_ffn: dw_w must be [hidden,1,3,3], got " + dw_w.shape_str());
  if (fc2_w.rank() != 2 || fc2_w.extent(0) != dim || fc2_w.extent(1) != hidden)
    throw ShapeError("mix_ffn: fc2_w must be [d,hidden], got " + fc2_w.shape_str());
  if (fc1_b.numel() != hidden || dw_b.numel() != hidden || fc2_b.numel() != dim)
    throw ShapeError("mix_ffn: bias extents");
}

template <typename T>
index_t MixFfnParamsT<T>::param_count() const {
  return fc1_w.numel() + fc1_b.numel() + dw_w.numel() + dw_b.numel() + fc2_w.numel() +
         fc2_b.numel();
}

template <typename T>
TensorT<T> mix_ffn(const TensorT<T>& x, const MixFfnParamsT<T>& p) {
  p.validate();
  check_map(x, p.dim, "mix_ffn");
  const index_t h = x.extent(1), w = x.extent(2);

  const TensorT<T> expanded = linear(to_tokens(x), p.fc1_w, &p.fc1_b);
  ConvSpec spec;
  spec.kernel = 3;
  spec.padding = 1;
  spec.groups = p.hidden;
  const TensorT<T> mixed = conv2d(to_map(expanded, p.hidden, h, w), p.dw_w, &p.dw_b, spec);
  const TensorT<T> projected = linear(to_tokens(silu(mixed)), p.fc2_w, &p.fc2_b);
  return to_map(projected, p.dim, h, w);
}

template <typename T>
void PatchEmbedParamsT<T>::validate() const {
  if (in_dim <= 0 || out_dim <= 0) throw ShapeError("patch_embed: bad dims");
  spec.validate();
  if (proj_w.rank() != 4 || proj_w.extent(0) != out_dim || proj_w.extent(1) != in_dim ||
      proj_w.extent(2) != spec.kernel || proj_w.extent(3) != spec.kernel)
    throw ShapeError("patch_embed: proj_w must be [out,in,k,k], got " + proj_w.shape_str());
  if (proj_b.numel() != out_dim || gamma.numel() != out_dim || beta.numel() != out_dim)
    throw ShapeError("patch_embed: bias/norm extents");
}

template <typename T>
index_t PatchEmbedParamsT<T>::param_count() const {
  return proj_w.numel() + proj_b.numel() + gamma.numel() + beta.numel();
}

template <typename T>
TensorT<T> patch_embed(const TensorT<T>& x, const PatchEmbedParamsT<T>& p) {
  p.validate();
  check_map(x, p.in_dim, "patch_embed");
  const TensorT<T> projected = conv2d(x, p.proj_w, &p.proj_b, p.spec);
  const index_t oh = projected.extent(1), ow = projected.extent(2);
  const TensorT<T> normed = layer_norm(to_tokens(projected), p.gamma, p.beta, kLayerNormEps);
  return to_map(normed, p.out_dim, oh, ow);
}

#define LVT_INSTANTIATE_LAYERS(T)                                                        \
  template struct SrParamsT<T>;                                                          \
  template struct MixFfnParamsT<T>;                                                      \
  template struct PatchEmbedParamsT<T>;                                                  \
  template TensorT<T> pad_to_multiple(const TensorT<T>&, index_t);                       \
  template TensorT<T> crop_map(const TensorT<T>&, index_t, index_t);                     \
  template TensorT<T> spatial_reduction(const TensorT<T>&, const SrParamsT<T>&);         \
  template SrGrads<T> spatial_reduction_backward(const TensorT<T>&, const SrParamsT<T>&, \
                                                 const TensorT<T>&);                     \
  template TensorT<T> mix_ffn(const TensorT<T>&, const MixFfnParamsT<T>&);               \
  template TensorT<T> patch_embed(const TensorT<T>&, const PatchEmbedParamsT<T>&);

LVT_INSTANTIATE_LAYERS(float)
LVT_INSTANTIATE_LAYERS(double)

#undef LVT_INSTANTIATE_LAYERS

}  // namespace lvt
