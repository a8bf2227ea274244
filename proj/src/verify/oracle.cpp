#include "verify/oracle.hpp"

#include <cmath>
#include <vector>

#include "nn/layers.hpp"  // kLayerNormEps only; no kernels

namespace lvt {

namespace {

constexpr index_t kMaxExtent = 16;

template <typename T>
void guard_map(const TensorT<T>& x, const char* who) {
  if (x.rank() != 3) throw ShapeError(std::string(who) + ": expected [C,H,W]");
  if (x.extent(0) > kMaxExtent || x.extent(1) > kMaxExtent || x.extent(2) > kMaxExtent) {
    throw ValueError(std::string(who) + ": oracle limited to extents <= 16, got " +
                     x.shape_str());
  }
}

template <typename T>
T sigmoid(T v) {
  return T(1) / (T(1) + std::exp(-v));
}

/// In-place stable softmax of a contiguous row.
template <typename T>
void softmax_row(std::vector<T>& row) {
  T mx = row[0];
  for (T v : row) mx = std::max(mx, v);
  T sum = 0;
  for (T& v : row) {
    v = std::exp(v - mx);
    sum += v;
  }
  for (T& v : row) v /= sum;
}

/// x[c, i, j] with zero padding outside the image.
template <typename T>
T at_padded(const TensorT<T>& x, index_t c, index_t i, index_t j) {
  if (i < 0 || j < 0 || i >= x.extent(1) || j >= x.extent(2)) return T(0);
  return x(c, i, j);
}

}  // namespace

template <typename T>
TensorT<T> oracle_conv2d(const TensorT<T>& x, const TensorT<T>& w, const TensorT<T>* bias,
                         const ConvSpec& spec) {
  guard_map(x, "oracle_conv2d");
  spec.validate();
  const index_t cin = x.extent(0);
  const index_t cout = w.extent(0), cpg = w.extent(1), k = spec.kernel;
  if (w.rank() != 4 || w.extent(2) != k || w.extent(3) != k || cpg * spec.groups != cin ||
      cout % spec.groups != 0) {
    throw ShapeError("oracle_conv2d: weight " + w.shape_str() + " inconsistent with input " +
                     x.shape_str());
  }
  const index_t oh = spec.out_extent(x.extent(1)), ow = spec.out_extent(x.extent(2));
  const index_t cout_per_group = cout / spec.groups;

  TensorT<T> y({cout, oh, ow});
  for (index_t co = 0; co < cout; ++co) {
    const index_t g = co / cout_per_group;
    for (index_t i = 0; i < oh; ++i) {
      for (index_t j = 0; j < ow; ++j) {
        T acc = bias ? (*bias)[co] : T(0);
        for (index_t ci = 0; ci < cpg; ++ci) {
          for (index_t a = 0; a < k; ++a) {
            for (index_t b = 0; b < k; ++b) {
              const index_t r = i * spec.stride - spec.padding + a * spec.dilation;
              const index_t cl = j * spec.stride - spec.padding + b * spec.dilation;
              acc += at_padded(x, g * cpg + ci, r, cl) * w(co, ci, a, b);
            }
          }
        }
        y(co, i, j) = acc;
      }
    }
  }
  return y;
}

template <typename T>
TensorT<T> oracle_attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v,
                            const AttentionConfig& cfg) {
  cfg.validate();
  const index_t n = q.extent(0), m = k.extent(0);
  const index_t dh = cfg.head_dim();
  if (q.extent(1) > kMaxExtent || n > kMaxExtent * kMaxExtent || m > kMaxExtent * kMaxExtent) {
    throw ValueError("oracle_attention: oracle limited to desk-scale shapes");
  }
  const T sc = static_cast<T>(cfg.logit_scale());

  TensorT<T> y({n, index_t(cfg.dim)});
  std::vector<T> row(m);
  for (index_t r = 0; r < n; ++r) {
    for (int hh = 0; hh < cfg.heads; ++hh) {
      const index_t c0 = index_t(hh) * dh;
      for (index_t j = 0; j < m; ++j) {
        T acc = 0;
        for (index_t c = 0; c < dh; ++c) acc += q(r, c0 + c) * k(j, c0 + c);
        row[j] = acc * sc;
      }
      softmax_row(row);
      for (index_t j = 0; j < m; ++j)
        for (index_t c = 0; c < dh; ++c) y(r, c0 + c) += row[j] * v(j, c0 + c);
    }
  }
  return y;
}

template <typename T>
TensorT<T> oracle_csa(const TensorT<T>& x, const CsaParamsT<T>& p,
                      const TensorT<T>* alpha_override) {
  guard_map(x, "oracle_csa");
  p.validate();
  const index_t d = p.dim, h = p.heads, dh = p.head_dim();
  const index_t k = p.kernel, k2 = k * k, s = p.stride, pad = p.padding();
  const index_t H = x.extent(1), W = x.extent(2);
  const index_t gh = (H + 2 * pad - k) / s + 1, gw = (W + 2 * pad - k) / s + 1;
  const index_t ct = (k - 1) / 2;  // center tap offset

  TensorT<T> pre({d, H, W});  // accumulated windows before the projection
  for (index_t wi = 0; wi < gh; ++wi) {
    for (index_t wj = 0; wj < gw; ++wj) {
      const index_t l = wi * gw + wj;
      // Window-center feature and per-head weight rows.
      std::vector<T> alpha(std::size_t(h) * k2 * k2);
      if (alpha_override) {
        for (index_t hh = 0; hh < h; ++hh)
          for (index_t i = 0; i < k2; ++i)
            for (index_t j = 0; j < k2; ++j)
              alpha[(hh * k2 + i) * k2 + j] = (*alpha_override)(l, hh, i, j);
      } else {
        std::vector<T> row(k2);
        for (index_t hh = 0; hh < h; ++hh) {
          for (index_t i = 0; i < k2; ++i) {
            for (index_t j = 0; j < k2; ++j) {
              T acc = 0;
              for (index_t c = 0; c < d; ++c) {
                acc += p.w_qk((hh * k2 + i) * k2 + j, c) *
                       at_padded(x, c, wi * s - pad + ct, wj * s - pad + ct);
              }
              row[j] = acc;
            }
            if (p.raw_division) {
              T sum = 0;
              for (T v : row) sum += v;
              for (T& v : row) v /= sum;
            } else {
              softmax_row(row);
            }
            for (index_t j = 0; j < k2; ++j) alpha[(hh * k2 + i) * k2 + j] = row[j];
          }
        }
      }
      // Output positions: weighted sums of per-position projected entries.
      for (index_t hh = 0; hh < h; ++hh) {
        for (index_t i = 0; i < k2; ++i) {
          const index_t r = wi * s - pad + i / k, cl = wj * s - pad + i % k;
          if (r < 0 || cl < 0 || r >= H || cl >= W) continue;
          for (index_t c = 0; c < dh; ++c) {
            T acc = 0;
            for (index_t j = 0; j < k2; ++j) {
              T proj = 0;
              for (index_t e = 0; e < dh; ++e) {
                proj += p.w_filter(j, hh, c, e) *
                        at_padded(x, hh * dh + e, wi * s - pad + j / k, wj * s - pad + j % k);
              }
              acc += alpha[(hh * k2 + i) * k2 + j] * proj;
            }
            pre(hh * dh + c, r, cl) += acc;
          }
        }
      }
    }
  }

  TensorT<T> y({d, H, W});
  for (index_t co = 0; co < d; ++co)
    for (index_t r = 0; r < H; ++r)
      for (index_t cl = 0; cl < W; ++cl) {
        T acc = 0;
        for (index_t c = 0; c < d; ++c) acc += p.w_out(co, c) * pre(c, r, cl);
        y(co, r, cl) = acc;
      }
  return y;
}

template <typename T>
TensorT<T> oracle_windowed_attention(const TensorT<T>& x, const CsaParamsT<T>& p) {
  guard_map(x, "oracle_windowed_attention");
  p.validate();
  const index_t d = p.dim, h = p.heads, dh = p.head_dim();
  const index_t k = p.kernel, k2 = k * k, s = p.stride, pad = p.padding();
  const index_t H = x.extent(1), W = x.extent(2);
  const index_t gh = (H + 2 * pad - k) / s + 1, gw = (W + 2 * pad - k) / s + 1;
  const index_t ct = (k - 1) / 2;

  TensorT<T> pre({d, H, W});
  std::vector<T> row(k2);
  for (index_t wi = 0; wi < gh; ++wi) {
    for (index_t wj = 0; wj < gw; ++wj) {
      for (index_t hh = 0; hh < h; ++hh) {
        // One value vector per window entry, using the single projection.
        std::vector<T> values(std::size_t(k2) * dh);
        for (index_t j = 0; j < k2; ++j)
          for (index_t c = 0; c < dh; ++c) {
            T acc = 0;
            for (index_t e = 0; e < dh; ++e) {
              acc += p.w_filter(0, hh, c, e) *
                     at_padded(x, hh * dh + e, wi * s - pad + j / k, wj * s - pad + j % k);
            }
            values[j * dh + c] = acc;
          }
        for (index_t i = 0; i < k2; ++i) {
          const index_t r = wi * s - pad + i / k, cl = wj * s - pad + i % k;
          if (r < 0 || cl < 0 || r >= H || cl >= W) continue;
          for (index_t j = 0; j < k2; ++j) {
            T acc = 0;
            for (index_t c = 0; c < d; ++c) {
              acc += p.w_qk((hh * k2 + i) * k2 + j, c) *
                     at_padded(x, c, wi * s - pad + ct, wj * s - pad + ct);
            }
            row[j] = acc;
          }
          if (p.raw_division) {
            T sum = 0;
            for (T v : row) sum += v;
            for (T& v : row) v /= sum;
          } else {
            softmax_row(row);
          }
          for (index_t c = 0; c < dh; ++c) {
            T acc = 0;
            for (index_t j = 0; j < k2; ++j) acc += row[j] * values[j * dh + c];
            pre(hh * dh + c, r, cl) += acc;
          }
        }
      }
    }
  }

  TensorT<T> y({d, H, W});
  for (index_t co = 0; co < d; ++co)
    for (index_t r = 0; r < H; ++r)
      for (index_t cl = 0; cl < W; ++cl) {
        T acc = 0;
        for (index_t c = 0; c < d; ++c) acc += p.w_out(co, c) * pre(c, r, cl);
        y(co, r, cl) = acc;
      }
  return y;
}

template <typename T>
TensorT<T> oracle_asa(const TensorT<T>& x, const AsaParamsT<T>& p) {
  guard_map(x, "oracle_asa");
  p.validate();
  const index_t d = p.dim, H = x.extent(1), W = x.extent(2);
  const index_t dh = p.attn.head_dim();

  // Query: 1x1 projection then summed SiLU-gated dilated depthwise branches.
  TensorT<T> qhat({d, H, W});
  for (index_t c = 0; c < d; ++c)
    for (index_t i = 0; i < H; ++i)
      for (index_t j = 0; j < W; ++j) {
        T acc = p.b_q1[c];
        for (index_t e = 0; e < d; ++e) acc += p.w_q1(c, e) * x(e, i, j);
        qhat(c, i, j) = acc;
      }
  TensorT<T> q({d, H, W});
  for (int rate : p.dilation_rates) {
    for (index_t c = 0; c < d; ++c)
      for (index_t i = 0; i < H; ++i)
        for (index_t j = 0; j < W; ++j) {
          T acc = p.b_qd[c];
          for (index_t a = 0; a < 3; ++a)
            for (index_t b = 0; b < 3; ++b)
              acc += at_padded(qhat, c, i + (a - 1) * rate, j + (b - 1) * rate) * p.w_qd(c, 0, a, b);
          q(c, i, j) += acc * sigmoid(acc);
        }
  }

  // Key/value source tokens: reduced grid or the raw tokens at ratio 1.
  index_t m;
  std::vector<T> kv;  // m x d
  if (p.sr.ratio == 1) {
    m = H * W;
    kv.resize(std::size_t(m) * d);
    for (index_t i = 0; i < H; ++i)
      for (index_t j = 0; j < W; ++j)
        for (index_t c = 0; c < d; ++c) kv[(i * W + j) * d + c] = x(c, i, j);
  } else {
    const index_t r = p.sr.ratio;
    const index_t mh = (H + r - 1) / r, mw = (W + r - 1) / r;
    m = mh * mw;
    kv.resize(std::size_t(m) * d);
    for (index_t i = 0; i < mh; ++i)
      for (index_t j = 0; j < mw; ++j) {
        for (index_t c = 0; c < d; ++c) {
          T acc = p.sr.proj_b[c];
          for (index_t e = 0; e < d; ++e)
            for (index_t a = 0; a < r; ++a)
              for (index_t b = 0; b < r; ++b)
                acc += at_padded(x, e, i * r + a, j * r + b) * p.sr.proj_w(c, e, a, b);
          kv[(i * mw + j) * d + c] = acc;
        }
        // Per-token layer norm, two-pass.
        T* tok = kv.data() + (i * mw + j) * d;
        T mean = 0;
        for (index_t c = 0; c < d; ++c) mean += tok[c];
        mean /= d;
        T var = 0;
        for (index_t c = 0; c < d; ++c) var += (tok[c] - mean) * (tok[c] - mean);
        var /= d;
        const T denom = std::sqrt(var + T(kLayerNormEps));
        for (index_t c = 0; c < d; ++c)
          tok[c] = (tok[c] - mean) / denom * p.sr.gamma[c] + p.sr.beta[c];
      }
  }

  std::vector<T> keys(std::size_t(m) * d), vals(std::size_t(m) * d);
  for (index_t t = 0; t < m; ++t)
    for (index_t c = 0; c < d; ++c) {
      T ka = p.b_k[c], va = p.b_v[c];
      for (index_t e = 0; e < d; ++e) {
        ka += p.w_k(c, e) * kv[t * d + e];
        va += p.w_v(c, e) * kv[t * d + e];
      }
      keys[t * d + c] = ka;
      vals[t * d + c] = va;
    }

  const index_t n = H * W;
  const T sc = static_cast<T>(p.attn.logit_scale());
  TensorT<T> y({d, H, W});
  std::vector<T> row(m), att(d);
  for (index_t t = 0; t < n; ++t) {
    const index_t qi = t / W, qj = t % W;
    std::fill(att.begin(), att.end(), T(0));
    for (int hh = 0; hh < p.attn.heads; ++hh) {
      const index_t c0 = index_t(hh) * dh;
      for (index_t u = 0; u < m; ++u) {
        T acc = 0;
        for (index_t c = 0; c < dh; ++c) acc += q(c0 + c, qi, qj) * keys[u * d + c0 + c];
        row[u] = acc * sc;
      }
      softmax_row(row);
      for (index_t u = 0; u < m; ++u)
        for (index_t c = 0; c < dh; ++c) att[c0 + c] += row[u] * vals[u * d + c0 + c];
    }
    for (index_t c = 0; c < d; ++c) {
      T acc = p.b_out[c];
      for (index_t e = 0; e < d; ++e) acc += p.w_out(c, e) * att[e];
      y(c, qi, qj) = acc;
    }
  }
  return y;
}

#define LVT_INSTANTIATE_ORACLE(T)                                                          \
  template TensorT<T> oracle_conv2d(const TensorT<T>&, const TensorT<T>&, const TensorT<T>*, \
                                    const ConvSpec&);                                      \
  template TensorT<T> oracle_attention(const TensorT<T>&, const TensorT<T>&,               \
                                       const TensorT<T>&, const AttentionConfig&);         \
  template TensorT<T> oracle_csa(const TensorT<T>&, const CsaParamsT<T>&, const TensorT<T>*); \
  template TensorT<T> oracle_windowed_attention(const TensorT<T>&, const CsaParamsT<T>&);  \
  template TensorT<T> oracle_asa(const TensorT<T>&, const AsaParamsT<T>&);

LVT_INSTANTIATE_ORACLE(float)
LVT_INSTANTIATE_ORACLE(double)

#undef LVT_INSTANTIATE_ORACLE

}  // namespace lvt
