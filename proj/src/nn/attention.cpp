#include "nn/attention.hpp"

#include <algorithm>
#include <limits>
#include <vector>

#include "core/parallel.hpp"
#include "core/profile.hpp"

namespace lvt {

namespace {

template <typename T>
void check_qkv(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v,
               const AttentionConfig& cfg) {
  cfg.validate();
  if (q.rank() != 2 || k.rank() != 2 || v.rank() != 2) {
    throw ShapeError("attention: Q/K/V must be token matrices");
  }
  if (q.extent(1) != cfg.dim || k.extent(1) != cfg.dim || v.extent(1) != cfg.dim) {
    throw ShapeError("attention: token dim mismatch with config dim " + std::to_string(cfg.dim));
  }
  if (k.extent(0) != v.extent(0)) {
    throw ShapeError("attention: K rows " + k.shape_str() + " vs V rows " + v.shape_str());
  }
}

}  // namespace

template <typename T>
TensorT<T> scaled_dot_attention(const TensorT<T>& q, const TensorT<T>& k, const TensorT<T>& v,
                                const AttentionConfig& cfg) {
  check_qkv(q, k, v, cfg);
  const index_t n = q.extent(0), m = k.extent(0);
  const index_t dh = cfg.head_dim();
  const T sc = static_cast<T>(cfg.logit_scale());

  TensorT<T> out({n, cfg.dim});
  parallel_for(n, [&](index_t lo, index_t hi) {
    std::vector<T> logits(m);
    for (index_t r = lo; r < hi; ++r) {
      for (int h = 0; h < cfg.heads; ++h) {
        const index_t c0 = index_t(h) * dh;
        const T* pq = q.data() + r * cfg.dim + c0;
        T mx = -std::numeric_limits<T>::infinity();
        for (index_t j = 0; j < m; ++j) {
          const T* pk = k.data() + j * cfg.dim + c0;
          T acc = 0;
          for (index_t c = 0; c < dh; ++c) acc += pq[c] * pk[c];
          logits[j] = acc * sc;
          mx = std::max(mx, logits[j]);
        }
        T sum = 0;
        for (index_t j = 0; j < m; ++j) {
          logits[j] = std::exp(logits[j] - mx);
          sum += logits[j];
        }
        T* po = out.data() + r * cfg.dim + c0;
        for (index_t j = 0; j < m; ++j) {
          const T w = logits[j] / sum;
          const T* pv = v.data() + j * cfg.dim + c0;
          for (index_t c = 0; c < dh; ++c) po[c] += w * pv[c];
        }
      }
    }
  });
  // Q K^T plus the weighted value sum, per head.
  mac_count_add(2ull * n * m * cfg.dim);
  require_finite(out, "scaled_dot_attention");
  return out;
}

template <typename T>
TensorT<T> attention_weights(const TensorT<T>& q, const TensorT<T>& k, const AttentionConfig& cfg,
                             int head) {
  cfg.validate();
  if (head < 0 || head >= cfg.heads) throw ShapeError("attention_weights: head out of range");
  const index_t n = q.extent(0), m = k.extent(0);
  const index_t dh = cfg.head_dim();
  const index_t c0 = index_t(head) * dh;
  const T sc = static_cast<T>(cfg.logit_scale());

  TensorT<T> logits({n, m});
  for (index_t r = 0; r < n; ++r) {
    for (index_t j = 0; j < m; ++j) {
      T acc = 0;
      for (index_t c = 0; c < dh; ++c) acc += q(r, c0 + c) * k(j, c0 + c);
      logits(r, j) = acc * sc;
    }
  }
  return softmax(logits, 1);
}

template <typename T>
AttentionGrads<T> scaled_dot_attention_backward(const TensorT<T>& q, const TensorT<T>& k,
                                                const TensorT<T>& v, const AttentionConfig& cfg,
                                                const TensorT<T>& dy) {
  check_qkv(q, k, v, cfg);
  if (dy.rank() != 2 || dy.extent(0) != q.extent(0) || dy.extent(1) != cfg.dim) {
    throw ShapeError("attention backward: upstream " + dy.shape_str());
  }
  const index_t n = q.extent(0), m = k.extent(0);
  const index_t dh = cfg.head_dim();
  const T sc = static_cast<T>(cfg.logit_scale());

  AttentionGrads<T> g{TensorT<T>(q.shape()), TensorT<T>(k.shape()), TensorT<T>(v.shape())};
  std::vector<T> w(m), dw(m);
  for (index_t r = 0; r < n; ++r) {
    for (int h = 0; h < cfg.heads; ++h) {
      const index_t c0 = index_t(h) * dh;
      const T* pq = q.data() + r * cfg.dim + c0;
      T mx = -std::numeric_limits<T>::infinity();
      for (index_t j = 0; j < m; ++j) {
        const T* pk = k.data() + j * cfg.dim + c0;
        T acc = 0;
        for (index_t c = 0; c < dh; ++c) acc += pq[c] * pk[c];
        w[j] = acc * sc;
        mx = std::max(mx, w[j]);
      }
      T sum = 0;
      for (index_t j = 0; j < m; ++j) {
        w[j] = std::exp(w[j] - mx);
        sum += w[j];
      }
      for (index_t j = 0; j < m; ++j) w[j] /= sum;

      const T* pdy = dy.data() + r * cfg.dim + c0;
      // dV and dw from the weighted sum.
      T dwdotw = 0;
      for (index_t j = 0; j < m; ++j) {
        const T* pv = v.data() + j * cfg.dim + c0;
        T* pdv = g.dv.data() + j * cfg.dim + c0;
        T acc = 0;
        for (index_t c = 0; c < dh; ++c) {
          acc += pdy[c] * pv[c];
          pdv[c] += w[j] * pdy[c];
        }
        dw[j] = acc;
        dwdotw += acc * w[j];
      }
      // Through the softmax and the scaled dot products.
      T* pdq = g.dq.data() + r * cfg.dim + c0;
      for (index_t j = 0; j < m; ++j) {
        const T dlogit = w[j] * (dw[j] - dwdotw) * sc;
        const T* pk = k.data() + j * cfg.dim + c0;
        T* pdk = g.dk.data() + j * cfg.dim + c0;
        for (index_t c = 0; c < dh; ++c) {
          pdq[c] += dlogit * pk[c];
          pdk[c] += dlogit * pq[c];
        }
      }
    }
  }
  require_finite(g.dq, "scaled_dot_attention_backward");
  return g;
}

#define LVT_INSTANTIATE_ATTN(T)                                                             \
  template TensorT<T> scaled_dot_attention(const TensorT<T>&, const TensorT<T>&,            \
                                           const TensorT<T>&, const AttentionConfig&);      \
  template TensorT<T> attention_weights(const TensorT<T>&, const TensorT<T>&,               \
                                        const AttentionConfig&, int);                       \
  template AttentionGrads<T> scaled_dot_attention_backward(                                 \
      const TensorT<T>&, const TensorT<T>&, const TensorT<T>&, const AttentionConfig&,      \
      const TensorT<T>&);

LVT_INSTANTIATE_ATTN(float)
LVT_INSTANTIATE_ATTN(double)

#undef LVT_INSTANTIATE_ATTN

}  // namespace lvt
