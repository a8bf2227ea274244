#include "core/ops.hpp"

#include <algorithm>
#include <cmath>

#include "core/parallel.hpp"
#include "core/profile.hpp"

namespace lvt {

namespace {

template <typename T>
void require_rank(const TensorT<T>& t, std::size_t rank, const char* op) {
  if (t.rank() != rank) {
    throw ShapeError(std::string(op) + ": expected rank " + std::to_string(rank) + ", got " +
                     t.shape_str());
  }
}

}  // namespace

template <typename T>
TensorT<T> matmul(const TensorT<T>& a, const TensorT<T>& b) {
  require_rank(a, 2, "matmul");
  require_rank(b, 2, "matmul");
  const index_t m = a.extent(0), k = a.extent(1), n = b.extent(1);
  if (b.extent(0) != k) {
    throw ShapeError("matmul: inner dims " + a.shape_str() + " vs " + b.shape_str());
  }
  TensorT<T> c({m, n});
  const T* pa = a.data();
  const T* pb = b.data();
  T* pc = c.data();
  parallel_for(m, [&](index_t lo, index_t hi) {
    for (index_t i = lo; i < hi; ++i) {
      for (index_t q = 0; q < k; ++q) {
        const T aiq = pa[i * k + q];
        const T* brow = pb + q * n;
        T* crow = pc + i * n;
        for (index_t j = 0; j < n; ++j) crow[j] += aiq * brow[j];
      }
    }
  });
  mac_count_add(static_cast<std::uint64_t>(m) * k * n);
  require_finite(c, "matmul");
  return c;
}

template <typename T>
TensorT<T> batched_matmul(const TensorT<T>& a, const TensorT<T>& b) {
  require_rank(a, 3, "batched_matmul");
  require_rank(b, 3, "batched_matmul");
  const index_t batch = a.extent(0), m = a.extent(1), k = a.extent(2), n = b.extent(2);
  if (b.extent(0) != batch || b.extent(1) != k) {
    throw ShapeError("batched_matmul: " + a.shape_str() + " vs " + b.shape_str());
  }
  TensorT<T> c({batch, m, n});
  parallel_for(batch, [&](index_t lo, index_t hi) {
    for (index_t s = lo; s < hi; ++s) {
      const T* pa = a.data() + s * m * k;
      const T* pb = b.data() + s * k * n;
      T* pc = c.data() + s * m * n;
      for (index_t i = 0; i < m; ++i) {
        for (index_t q = 0; q < k; ++q) {
          const T aiq = pa[i * k + q];
          const T* brow = pb + q * n;
          T* crow = pc + i * n;
          for (index_t j = 0; j < n; ++j) crow[j] += aiq * brow[j];
        }
      }
    }
  });
  mac_count_add(static_cast<std::uint64_t>(batch) * m * k * n);
  require_finite(c, "batched_matmul");
  return c;
}

namespace {

template <typename T, typename Fn>
void for_each_lane(const TensorT<T>& t, int axis, Fn&& fn) {
  const auto& shape = t.shape();
  if (axis < 0 || static_cast<std::size_t>(axis) >= shape.size()) {
    throw ShapeError("axis " + std::to_string(axis) + " out of range for " + t.shape_str());
  }
  index_t outer = 1, inner = 1;
  for (int a = 0; a < axis; ++a) outer *= shape[a];
  for (std::size_t a = axis + 1; a < shape.size(); ++a) inner *= shape[a];
  const index_t n = shape[axis];
  for (index_t o = 0; o < outer; ++o) {
    for (index_t i = 0; i < inner; ++i) {
      fn(o * n * inner + i, inner, n);
    }
  }
}

}  // namespace

template <typename T>
TensorT<T> softmax(const TensorT<T>& t, int axis) {
  TensorT<T> out(t.shape());
  for_each_lane(t, axis, [&](index_t base, index_t stride, index_t n) {
    T mx = t[base];
    for (index_t j = 1; j < n; ++j) mx = std::max(mx, t[base + j * stride]);
    T sum = 0;
    for (index_t j = 0; j < n; ++j) {
      T e = std::exp(t[base + j * stride] - mx);
      out[base + j * stride] = e;
      sum += e;
    }
    for (index_t j = 0; j < n; ++j) out[base + j * stride] /= sum;
  });
  require_finite(out, "softmax");
  return out;
}

template <typename T>
TensorT<T> softmax_backward(const TensorT<T>& y, const TensorT<T>& dy, int axis) {
  if (!y.same_shape(dy)) throw ShapeError("softmax_backward: shape mismatch");
  TensorT<T> dz(y.shape());
  for_each_lane(y, axis, [&](index_t base, index_t stride, index_t n) {
    T acc = 0;
    for (index_t j = 0; j < n; ++j) acc += dy[base + j * stride] * y[base + j * stride];
    for (index_t j = 0; j < n; ++j) {
      const index_t ix = base + j * stride;
      dz[ix] = y[ix] * (dy[ix] - acc);
    }
  });
  require_finite(dz, "softmax_backward");
  return dz;
}

namespace {

template <typename T>
void check_conv_shapes(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>* bias,
                       const ConvSpec& spec) {
  require_rank(x, 3, "conv2d");
  require_rank(w, 4, "conv2d");
  spec.validate();
  const index_t c_in = x.extent(0), c_out = w.extent(0);
  if (c_in % spec.groups != 0 || c_out % spec.groups != 0) {
    throw ShapeError("conv2d: groups " + std::to_string(spec.groups) + " do not divide channels");
  }
  if (w.extent(1) != c_in / spec.groups) {
    throw ShapeError("conv2d: weight " + w.shape_str() + " inconsistent with input " +
                     x.shape_str() + " and groups " + std::to_string(spec.groups));
  }
  if (w.extent(2) != spec.kernel || w.extent(3) != spec.kernel) {
    throw ShapeError("conv2d: weight kernel " + w.shape_str() + " vs spec k=" +
                     std::to_string(spec.kernel));
  }
  if (bias != nullptr && (bias->rank() != 1 || bias->extent(0) != c_out)) {
    throw ShapeError("conv2d: bias shape " + bias->shape_str());
  }
}

}  // namespace

template <typename T>
TensorT<T> conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>* bias,
                  const ConvSpec& spec) {
  check_conv_shapes(x, w, bias, spec);
  const index_t c_in = x.extent(0), h = x.extent(1), wd = x.extent(2);
  const index_t c_out = w.extent(0);
  const index_t oh = spec.out_extent(h), ow = spec.out_extent(wd);
  const index_t cpg = c_in / spec.groups;
  const index_t opg = c_out / spec.groups;
  const int k = spec.kernel;

  TensorT<T> y({c_out, oh, ow});
  parallel_for(c_out, [&](index_t lo, index_t hi) {
    for (index_t oc = lo; oc < hi; ++oc) {
      const index_t group = oc / opg;
      const index_t ic0 = group * cpg;
      for (index_t oy = 0; oy < oh; ++oy) {
        for (index_t ox = 0; ox < ow; ++ox) {
          T acc = bias ? (*bias)[oc] : T(0);
          for (index_t ic = 0; ic < cpg; ++ic) {
            for (int ky = 0; ky < k; ++ky) {
              const index_t iy = oy * spec.stride - spec.padding + index_t(ky) * spec.dilation;
              if (iy < 0 || iy >= h) continue;
              for (int kx = 0; kx < k; ++kx) {
                const index_t ix = ox * spec.stride - spec.padding + index_t(kx) * spec.dilation;
                if (ix < 0 || ix >= wd) continue;
                acc += w(oc, ic, ky, kx) * x(ic0 + ic, iy, ix);
              }
            }
          }
          y(oc, oy, ox) = acc;
        }
      }
    }
  });
  mac_count_add(static_cast<std::uint64_t>(k) * k * cpg * c_out * oh * ow);
  require_finite(y, "conv2d");
  return y;
}

template <typename T>
Conv2dGrads<T> conv2d_backward(const TensorT<T>& x, const TensorT<T>& w, bool has_bias,
                               const ConvSpec& spec, const TensorT<T>& dy) {
  check_conv_shapes<T>(x, w, nullptr, spec);
  const index_t c_in = x.extent(0), h = x.extent(1), wd = x.extent(2);
  const index_t c_out = w.extent(0);
  const index_t oh = spec.out_extent(h), ow = spec.out_extent(wd);
  if (dy.rank() != 3 || dy.extent(0) != c_out || dy.extent(1) != oh || dy.extent(2) != ow) {
    throw ShapeError("conv2d_backward: upstream " + dy.shape_str());
  }
  const index_t cpg = c_in / spec.groups;
  const index_t opg = c_out / spec.groups;
  const int k = spec.kernel;

  Conv2dGrads<T> g{TensorT<T>(x.shape()), TensorT<T>(w.shape()),
                   has_bias ? TensorT<T>({c_out}) : TensorT<T>()};
  for (index_t oc = 0; oc < c_out; ++oc) {
    const index_t ic0 = (oc / opg) * cpg;
    for (index_t oy = 0; oy < oh; ++oy) {
      for (index_t ox = 0; ox < ow; ++ox) {
        const T up = dy(oc, oy, ox);
        if (has_bias) g.dbias[oc] += up;
        for (index_t ic = 0; ic < cpg; ++ic) {
          for (int ky = 0; ky < k; ++ky) {
            const index_t iy = oy * spec.stride - spec.padding + index_t(ky) * spec.dilation;
            if (iy < 0 || iy >= h) continue;
            for (int kx = 0; kx < k; ++kx) {
              const index_t ix = ox * spec.stride - spec.padding + index_t(kx) * spec.dilation;
              if (ix < 0 || ix >= wd) continue;
              g.dw(oc, ic, ky, kx) += up * x(ic0 + ic, iy, ix);
              g.dx(ic0 + ic, iy, ix) += up * w(oc, ic, ky, kx);
            }
          }
        }
      }
    }
  }
  require_finite(g.dx, "conv2d_backward");
  require_finite(g.dw, "conv2d_backward");
  return g;
}

template <typename T>
TensorT<T> unfold(const TensorT<T>& x, const ConvSpec& spec) {
  require_rank(x, 3, "unfold");
  const index_t c = x.extent(0), h = x.extent(1), wd = x.extent(2);
  const index_t oh = spec.out_extent(h), ow = spec.out_extent(wd);
  const int k = spec.kernel;
  const index_t kk = index_t(k) * k;

  TensorT<T> out({oh * ow, kk, c});
  parallel_for(oh * ow, [&](index_t lo, index_t hi) {
    for (index_t l = lo; l < hi; ++l) {
      const index_t wi = l / ow, wj = l % ow;
      for (int a = 0; a < k; ++a) {
        const index_t iy = wi * spec.stride - spec.padding + index_t(a) * spec.dilation;
        for (int b = 0; b < k; ++b) {
          const index_t ix = wj * spec.stride - spec.padding + index_t(b) * spec.dilation;
          const index_t q = index_t(a) * k + b;
          if (iy < 0 || iy >= h || ix < 0 || ix >= wd) continue;
          for (index_t ch = 0; ch < c; ++ch) out(l, q, ch) = x(ch, iy, ix);
        }
      }
    }
  });
  require_finite(out, "unfold");
  return out;
}

template <typename T>
TensorT<T> fold(const TensorT<T>& w, index_t out_h, index_t out_w, const ConvSpec& spec) {
  require_rank(w, 3, "fold");
  const index_t oh = spec.out_extent(out_h), ow = spec.out_extent(out_w);
  const int k = spec.kernel;
  const index_t kk = index_t(k) * k;
  if (w.extent(0) != oh * ow || w.extent(1) != kk) {
    throw ShapeError("fold: window tensor " + w.shape_str() + " inconsistent with extents " +
                     std::to_string(out_h) + "x" + std::to_string(out_w));
  }
  const index_t c = w.extent(2);

  TensorT<T> out({c, out_h, out_w});
  for (index_t l = 0; l < oh * ow; ++l) {
    const index_t wi = l / ow, wj = l % ow;
    for (int a = 0; a < k; ++a) {
      const index_t iy = wi * spec.stride - spec.padding + index_t(a) * spec.dilation;
      if (iy < 0 || iy >= out_h) continue;
      for (int b = 0; b < k; ++b) {
        const index_t ix = wj * spec.stride - spec.padding + index_t(b) * spec.dilation;
        if (ix < 0 || ix >= out_w) continue;
        const index_t q = index_t(a) * k + b;
        for (index_t ch = 0; ch < c; ++ch) out(ch, iy, ix) += w(l, q, ch);
      }
    }
  }
  require_finite(out, "fold");
  return out;
}

template <typename T>
TensorT<T> layer_norm(const TensorT<T>& x, const TensorT<T>& gamma, const TensorT<T>& beta,
                      double eps) {
  if (x.rank() < 1) throw ShapeError("layer_norm: scalar input");
  if (eps <= 0) throw ValueError("layer_norm: eps must be positive");
  const index_t d = x.extent(x.rank() - 1);
  if (gamma.numel() != d || beta.numel() != d) {
    throw ShapeError("layer_norm: gamma/beta must have extent " + std::to_string(d));
  }
  const index_t rows = x.numel() / d;
  TensorT<T> out(x.shape());
  parallel_for(rows, [&](index_t lo, index_t hi) {
    for (index_t r = lo; r < hi; ++r) {
      const T* px = x.data() + r * d;
      T* po = out.data() + r * d;
      T mean = 0;
      for (index_t i = 0; i < d; ++i) mean += px[i];
      mean /= static_cast<T>(d);
      T var = 0;
      for (index_t i = 0; i < d; ++i) {
        const T diff = px[i] - mean;
        var += diff * diff;
      }
      var /= static_cast<T>(d);
      const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
      for (index_t i = 0; i < d; ++i) po[i] = (px[i] - mean) * inv * gamma[i] + beta[i];
    }
  });
  require_finite(out, "layer_norm");
  return out;
}

template <typename T>
LayerNormGrads<T> layer_norm_backward(const TensorT<T>& x, const TensorT<T>& gamma, double eps,
                                      const TensorT<T>& dy) {
  if (!x.same_shape(dy)) throw ShapeError("layer_norm_backward: shape mismatch");
  const index_t d = x.extent(x.rank() - 1);
  const index_t rows = x.numel() / d;
  LayerNormGrads<T> g{TensorT<T>(x.shape()), TensorT<T>({d}), TensorT<T>({d})};
  for (index_t r = 0; r < rows; ++r) {
    const T* px = x.data() + r * d;
    const T* pdy = dy.data() + r * d;
    T* pdx = g.dx.data() + r * d;
    T mean = 0;
    for (index_t i = 0; i < d; ++i) mean += px[i];
    mean /= static_cast<T>(d);
    T var = 0;
    for (index_t i = 0; i < d; ++i) {
      const T diff = px[i] - mean;
      var += diff * diff;
    }
    var /= static_cast<T>(d);
    const T inv = T(1) / std::sqrt(var + static_cast<T>(eps));
    T sum_dxhat = 0, sum_dxhat_xhat = 0;
    for (index_t i = 0; i < d; ++i) {
      const T xhat = (px[i] - mean) * inv;
      const T dxhat = pdy[i] * gamma[i];
      g.dgamma[i] += pdy[i] * xhat;
      g.dbeta[i] += pdy[i];
      sum_dxhat += dxhat;
      sum_dxhat_xhat += dxhat * xhat;
    }
    for (index_t i = 0; i < d; ++i) {
      const T xhat = (px[i] - mean) * inv;
      const T dxhat = pdy[i] * gamma[i];
      pdx[i] = inv * (dxhat - sum_dxhat / static_cast<T>(d) -
                      xhat * sum_dxhat_xhat / static_cast<T>(d));
    }
  }
  require_finite(g.dx, "layer_norm_backward");
  return g;
}

template <typename T>
TensorT<T> silu(const TensorT<T>& x) {
  TensorT<T> out(x.shape());
  for (index_t i = 0; i < x.numel(); ++i) {
    const T m = x[i];
    out[i] = m / (T(1) + std::exp(-m));
  }
  require_finite(out, "silu");
  return out;
}

template <typename T>
TensorT<T> silu_backward(const TensorT<T>& x, const TensorT<T>& dy) {
  if (!x.same_shape(dy)) throw ShapeError("silu_backward: shape mismatch");
  TensorT<T> dx(x.shape());
  for (index_t i = 0; i < x.numel(); ++i) {
    const T m = x[i];
    const T sig = T(1) / (T(1) + std::exp(-m));
    dx[i] = dy[i] * sig * (T(1) + m * (T(1) - sig));
  }
  require_finite(dx, "silu_backward");
  return dx;
}

template <typename T>
TensorT<T> linear(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>* bias) {
  require_rank(x, 2, "linear");
  require_rank(w, 2, "linear");
  const index_t n = x.extent(0), din = x.extent(1), dout = w.extent(0);
  if (w.extent(1) != din) {
    throw ShapeError("linear: input " + x.shape_str() + " vs weight " + w.shape_str());
  }
  if (bias != nullptr && bias->numel() != dout) {
    throw ShapeError("linear: bias " + bias->shape_str());
  }
  TensorT<T> y({n, dout});
  parallel_for(n, [&](index_t lo, index_t hi) {
    for (index_t r = lo; r < hi; ++r) {
      const T* px = x.data() + r * din;
      T* py = y.data() + r * dout;
      for (index_t o = 0; o < dout; ++o) {
        const T* pw = w.data() + o * din;
        T acc = bias ? (*bias)[o] : T(0);
        for (index_t i = 0; i < din; ++i) acc += px[i] * pw[i];
        py[o] = acc;
      }
    }
  });
  mac_count_add(static_cast<std::uint64_t>(n) * din * dout);
  require_finite(y, "linear");
  return y;
}

template <typename T>
LinearGrads<T> linear_backward(const TensorT<T>& x, const TensorT<T>& w, bool has_bias,
                               const TensorT<T>& dy) {
  const index_t n = x.extent(0), din = x.extent(1), dout = w.extent(0);
  if (dy.rank() != 2 || dy.extent(0) != n || dy.extent(1) != dout) {
    throw ShapeError("linear_backward: upstream " + dy.shape_str());
  }
  LinearGrads<T> g{TensorT<T>(x.shape()), TensorT<T>(w.shape()),
                   has_bias ? TensorT<T>({dout}) : TensorT<T>()};
  for (index_t r = 0; r < n; ++r) {
    const T* px = x.data() + r * din;
    const T* pdy = dy.data() + r * dout;
    T* pdx = g.dx.data() + r * din;
    for (index_t o = 0; o < dout; ++o) {
      const T up = pdy[o];
      if (has_bias) g.dbias[o] += up;
      const T* pw = w.data() + o * din;
      T* pdw = g.dw.data() + o * din;
      for (index_t i = 0; i < din; ++i) {
        pdw[i] += up * px[i];
        pdx[i] += up * pw[i];
      }
    }
  }
  require_finite(g.dx, "linear_backward");
  return g;
}

template <typename T>
TensorT<T> transpose2d(const TensorT<T>& a) {
  require_rank(a, 2, "transpose2d");
  const index_t m = a.extent(0), n = a.extent(1);
  TensorT<T> out({n, m});
  for (index_t i = 0; i < m; ++i)
    for (index_t j = 0; j < n; ++j) out(j, i) = a(i, j);
  return out;
}

template <typename T>
TensorT<T> to_tokens(const TensorT<T>& map) {
  require_rank(map, 3, "to_tokens");
  const index_t c = map.extent(0), h = map.extent(1), w = map.extent(2);
  TensorT<T> out({h * w, c});
  for (index_t ch = 0; ch < c; ++ch)
    for (index_t p = 0; p < h * w; ++p) out(p, ch) = map[ch * h * w + p];
  return out;
}

template <typename T>
TensorT<T> to_map(const TensorT<T>& tokens, index_t channels, index_t height, index_t width) {
  require_rank(tokens, 2, "to_map");
  if (tokens.extent(0) != height * width || tokens.extent(1) != channels) {
    throw ShapeError("to_map: tokens " + tokens.shape_str() + " vs " + std::to_string(channels) +
                     "x" + std::to_string(height) + "x" + std::to_string(width));
  }
  TensorT<T> out({channels, height, width});
  for (index_t p = 0; p < height * width; ++p)
    for (index_t ch = 0; ch < channels; ++ch) out[ch * height * width + p] = tokens(p, ch);
  return out;
}

template <typename T>
TensorT<T> add(const TensorT<T>& a, const TensorT<T>& b) {
  if (!a.same_shape(b)) throw ShapeError("add: " + a.shape_str() + " vs " + b.shape_str());
  TensorT<T> out(a.shape());
  for (index_t i = 0; i < a.numel(); ++i) out[i] = a[i] + b[i];
  return out;
}

template <typename T>
TensorT<T> scale(const TensorT<T>& a, T factor) {
  TensorT<T> out(a.shape());
  for (index_t i = 0; i < a.numel(); ++i) out[i] = a[i] * factor;
  return out;
}

template <typename T>
T dot(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.numel() != b.numel()) throw ShapeError("dot: element counts differ");
  T acc = 0;
  for (index_t i = 0; i < a.numel(); ++i) acc += a[i] * b[i];
  return acc;
}

template <typename T>
T max_abs_diff(const TensorT<T>& a, const TensorT<T>& b) {
  if (a.numel() != b.numel()) throw ShapeError("max_abs_diff: element counts differ");
  T mx = 0;
  for (index_t i = 0; i < a.numel(); ++i) mx = std::max(mx, std::abs(a[i] - b[i]));
  return mx;
}

template <typename T>
T max_abs(const TensorT<T>& a) {
  T mx = 0;
  for (index_t i = 0; i < a.numel(); ++i) mx = std::max(mx, std::abs(a[i]));
  return mx;
}

#define LVT_INSTANTIATE_OPS(T)                                                               \
  template TensorT<T> matmul(const TensorT<T>&, const TensorT<T>&);                          \
  template TensorT<T> batched_matmul(const TensorT<T>&, const TensorT<T>&);                  \
  template TensorT<T> softmax(const TensorT<T>&, int);                                       \
  template TensorT<T> softmax_backward(const TensorT<T>&, const TensorT<T>&, int);           \
  template TensorT<T> conv2d(const TensorT<T>&, const TensorT<T>&, const TensorT<T>*,        \
                             const ConvSpec&);                                               \
  template Conv2dGrads<T> conv2d_backward(const TensorT<T>&, const TensorT<T>&, bool,        \
                                          const ConvSpec&, const TensorT<T>&);               \
  template TensorT<T> unfold(const TensorT<T>&, const ConvSpec&);                            \
  template TensorT<T> fold(const TensorT<T>&, index_t, index_t, const ConvSpec&);            \
  template TensorT<T> layer_norm(const TensorT<T>&, const TensorT<T>&, const TensorT<T>&,    \
                                 double);                                                    \
  template LayerNormGrads<T> layer_norm_backward(const TensorT<T>&, const TensorT<T>&,       \
                                                 double, const TensorT<T>&);                 \
  template TensorT<T> silu(const TensorT<T>&);                                               \
  template TensorT<T> silu_backward(const TensorT<T>&, const TensorT<T>&);                   \
  template TensorT<T> linear(const TensorT<T>&, const TensorT<T>&, const TensorT<T>*);       \
  template LinearGrads<T> linear_backward(const TensorT<T>&, const TensorT<T>&, bool,        \
                                          const TensorT<T>&);                                \
  template TensorT<T> transpose2d(const TensorT<T>&);                                        \
  template TensorT<T> to_tokens(const TensorT<T>&);                                          \
  template TensorT<T> to_map(const TensorT<T>&, index_t, index_t, index_t);                  \
  template TensorT<T> add(const TensorT<T>&, const TensorT<T>&);                             \
  template TensorT<T> scale(const TensorT<T>&, T);                                           \
  template T dot(const TensorT<T>&, const TensorT<T>&);                                      \
  template T max_abs_diff(const TensorT<T>&, const TensorT<T>&);                             \
  template T max_abs(const TensorT<T>&);

LVT_INSTANTIATE_OPS(float)
LVT_INSTANTIATE_OPS(double)

#undef LVT_INSTANTIATE_OPS

}  // namespace lvt
