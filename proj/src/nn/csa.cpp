#include "nn/csa.hpp"

#include <utility>

#include "core/ops.hpp"

namespace lvt {

namespace {

template <typename T>
ConvSpec window_spec(const CsaParamsT<T>& p) {
  ConvSpec spec;
  spec.kernel = p.kernel;
  spec.stride = p.stride;
  spec.padding = p.padding();
  return spec;
}

/// Everything csa_forward computes before the output projection; the
/// backward pass replays it and then walks the chain in reverse.
template <typename T>
struct CsaParts {
  TensorT<T> unf;      // [L, k2, d]
  TensorT<T> centers;  // [L, d]
  TensorT<T> alpha;    // [L, h, k2, k2]
  TensorT<T> values;   // [k2*h, L, dh] per-position projected windows
  TensorT<T> folded;   // [d, H, W]
};

template <typename T>
CsaParts<T> run_forward(const TensorT<T>& x, const CsaParamsT<T>& p,
                        const TensorT<T>* alpha_override) {
  p.validate();
  if (x.rank() != 3 || x.extent(0) != p.dim) {
    throw ShapeError("csa: expected [d,H,W] with d=" + std::to_string(p.dim) + ", got " +
                     x.shape_str());
  }
  const index_t d = p.dim, h = p.heads, dh = p.head_dim();
  const index_t k2 = index_t(p.kernel) * p.kernel;
  const index_t H = x.extent(1), W = x.extent(2);

  CsaParts<T> parts;
  parts.unf = unfold(x, window_spec(p));
  const index_t L = parts.unf.extent(0);
  const index_t cq = (k2 - 1) / 2;

  parts.centers = TensorT<T>({L, d});
  for (index_t l = 0; l < L; ++l)
    for (index_t c = 0; c < d; ++c) parts.centers(l, c) = parts.unf(l, cq, c);

  if (alpha_override) {
    if (alpha_override->rank() != 4 || alpha_override->extent(0) != L ||
        alpha_override->extent(1) != h || alpha_override->extent(2) != k2 ||
        alpha_override->extent(3) != k2) {
      throw ShapeError("csa: alpha override must be [L,h,k2,k2], got " +
                       alpha_override->shape_str());
    }
    parts.alpha = *alpha_override;
  } else {
    parts.alpha = csa_alpha(parts.centers, p);
  }

  // Per window position j and head: project the window entry by W_{i->j}.
  TensorT<T> lhs({k2 * h, L, dh});
  TensorT<T> rhs({k2 * h, dh, dh});
  for (index_t j = 0; j < k2; ++j) {
    for (index_t hh = 0; hh < h; ++hh) {
      const index_t b = j * h + hh;
      for (index_t l = 0; l < L; ++l)
        for (index_t c = 0; c < dh; ++c) lhs(b, l, c) = parts.unf(l, j, hh * dh + c);
      for (index_t r = 0; r < dh; ++r)
        for (index_t c = 0; c < dh; ++c) rhs(b, r, c) = p.w_filter(j, hh, c, r);
    }
  }
  parts.values = batched_matmul(lhs, rhs);  // [k2*h, L, dh]

  // Weighted summation across window positions under alpha.
  TensorT<T> aw({L * h, k2, k2}, parts.alpha.vec());
  TensorT<T> vw({L * h, k2, dh});
  for (index_t l = 0; l < L; ++l)
    for (index_t hh = 0; hh < h; ++hh)
      for (index_t j = 0; j < k2; ++j)
        for (index_t c = 0; c < dh; ++c) vw(l * h + hh, j, c) = parts.values(j * h + hh, l, c);
  const TensorT<T> mixed = batched_matmul(aw, vw);  // [L*h, k2, dh]

  TensorT<T> windows({L, k2, d});
  for (index_t l = 0; l < L; ++l)
    for (index_t hh = 0; hh < h; ++hh)
      for (index_t i = 0; i < k2; ++i)
        for (index_t c = 0; c < dh; ++c) windows(l, i, hh * dh + c) = mixed(l * h + hh, i, c);
  parts.folded = fold(windows, H, W, window_spec(p));
  return parts;
}

}  // namespace

template <typename T>
void CsaParamsT<T>::validate() const {
  if (dim <= 0 || heads <= 0 || dim % heads != 0) {
    throw ShapeError("csa: dim " + std::to_string(dim) + " not divisible by heads " +
                     std::to_string(heads));
  }
  if (kernel < 1 || kernel % 2 == 0 || stride < 1) {
    throw ShapeError("csa: kernel must be odd and positive, stride positive");
  }
  const index_t k2 = index_t(kernel) * kernel;
  const index_t dh = head_dim();
  if (w_filter.rank() != 4 || w_filter.extent(0) != k2 || w_filter.extent(1) != heads ||
      w_filter.extent(2) != dh || w_filter.extent(3) != dh) {
    throw ShapeError("csa: w_filter must be [k2,heads,dh,dh], got " + w_filter.shape_str());
  }
  if (w_qk.rank() != 2 || w_qk.extent(0) != heads * k2 * k2 || w_qk.extent(1) != dim) {
    throw ShapeError("csa: w_qk must be [heads*k^4,d], got " + w_qk.shape_str());
  }
  if (w_out.rank() != 2 || w_out.extent(0) != dim || w_out.extent(1) != dim) {
    throw ShapeError("csa: w_out must be [d,d], got " + w_out.shape_str());
  }
}

template <typename T>
index_t CsaParamsT<T>::param_count() const {
  return w_filter.numel() + w_qk.numel() + w_out.numel();
}

template <typename T>
TensorT<T> csa_alpha(const TensorT<T>& centers, const CsaParamsT<T>& p) {
  p.validate();
  if (centers.rank() != 2 || centers.extent(1) != p.dim) {
    throw ShapeError("csa_alpha: centers must be [L,d], got " + centers.shape_str());
  }
  const index_t L = centers.extent(0), h = p.heads;
  const index_t k2 = index_t(p.kernel) * p.kernel;

  TensorT<T> scores = linear<T>(centers, p.w_qk, nullptr);
  TensorT<T> rows({L, h, k2, k2}, std::move(scores.vec()));
  if (!p.raw_division) return softmax(rows, 3);

  // Paper-literal variant: divide each row of raw scores by its sum.
  TensorT<T> out(rows.shape());
  for (index_t r = 0; r < L * h * k2; ++r) {
    T sum = 0;
    for (index_t j = 0; j < k2; ++j) sum += rows[r * k2 + j];
    if (std::abs(sum) < T(1e-12)) {
      throw ValueError("csa_alpha: raw-division row sum is ~0; use exponential normalization");
    }
    for (index_t j = 0; j < k2; ++j) out[r * k2 + j] = rows[r * k2 + j] / sum;
  }
  return out;
}

template <typename T>
TensorT<T> csa_forward(const TensorT<T>& x, const CsaParamsT<T>& p,
                       const TensorT<T>* alpha_override) {
  CsaParts<T> parts = run_forward(x, p, alpha_override);
  const TensorT<T> projected =
      linear<T>(to_tokens(parts.folded), p.w_out, nullptr);
  return to_map(projected, p.dim, x.extent(1), x.extent(2));
}

template <typename T>
CsaGrads<T> csa_backward(const TensorT<T>& x, const CsaParamsT<T>& p, const TensorT<T>& dy,
                         const TensorT<T>* alpha_override) {
  CsaParts<T> parts = run_forward(x, p, alpha_override);
  if (!dy.same_shape(x)) {
    throw ShapeError("csa_backward: upstream " + dy.shape_str() + " vs input " + x.shape_str());
  }
  const index_t d = p.dim, h = p.heads, dh = p.head_dim();
  const index_t k2 = index_t(p.kernel) * p.kernel;
  const index_t H = x.extent(1), W = x.extent(2);
  const index_t L = parts.unf.extent(0);
  const index_t cq = (k2 - 1) / 2;

  CsaGrads<T> g;
  g.dw_filter = TensorT<T>(p.w_filter.shape());
  g.dw_qk = TensorT<T>(p.w_qk.shape());

  // Output projection.
  LinearGrads<T> lo = linear_backward(to_tokens(parts.folded), p.w_out, false, to_tokens(dy));
  g.dw_out = std::move(lo.dw);

  // Fold's adjoint is the unfold gather.
  const TensorT<T> dwindows = unfold(to_map(lo.dx, d, H, W), window_spec(p));  // [L,k2,d]

  // Weighted-summation backward: d_alpha and d_values.
  TensorT<T> dalpha({L, h, k2, k2});
  TensorT<T> dvalues({k2 * h, L, dh});
  for (index_t l = 0; l < L; ++l) {
    for (index_t hh = 0; hh < h; ++hh) {
      for (index_t i = 0; i < k2; ++i) {
        for (index_t j = 0; j < k2; ++j) {
          T acc = 0;
          const T a = parts.alpha(l, hh, i, j);
          for (index_t c = 0; c < dh; ++c) {
            const T dwin = dwindows(l, i, hh * dh + c);
            acc += dwin * parts.values(j * h + hh, l, c);
            dvalues(j * h + hh, l, c) += a * dwin;
          }
          dalpha(l, hh, i, j) = acc;
        }
      }
    }
  }

  // Window-projection backward into the unfolded grad and w_filter.
  TensorT<T> dunf({L, k2, d});
  for (index_t j = 0; j < k2; ++j) {
    for (index_t hh = 0; hh < h; ++hh) {
      const index_t b = j * h + hh;
      for (index_t l = 0; l < L; ++l) {
        for (index_t c = 0; c < dh; ++c) {
          const T dv = dvalues(b, l, c);
          if (dv == T(0)) continue;
          for (index_t r = 0; r < dh; ++r) {
            dunf(l, j, hh * dh + r) += dv * p.w_filter(j, hh, c, r);
            g.dw_filter(j, hh, c, r) += dv * parts.unf(l, j, hh * dh + r);
          }
        }
      }
    }
  }

  // Alpha prediction backward (absent when the override supplied alpha).
  if (!alpha_override) {
    TensorT<T> dscores;
    if (p.raw_division) {
      const TensorT<T> raw_mat =
          linear<T>(parts.centers, p.w_qk, nullptr);
      TensorT<T> raw({L, h, k2, k2}, raw_mat.vec());
      dscores = TensorT<T>(raw.shape());
      for (index_t r = 0; r < L * h * k2; ++r) {
        T sum = 0, mix = 0;
        for (index_t j = 0; j < k2; ++j) sum += raw[r * k2 + j];
        for (index_t j = 0; j < k2; ++j) mix += dalpha[r * k2 + j] * parts.alpha[r * k2 + j];
        for (index_t j = 0; j < k2; ++j) dscores[r * k2 + j] = (dalpha[r * k2 + j] - mix) / sum;
      }
    } else {
      dscores = softmax_backward(parts.alpha, dalpha, 3);
    }
    TensorT<T> dscore_mat({L, h * k2 * k2}, std::move(dscores.vec()));
    LinearGrads<T> lq = linear_backward(parts.centers, p.w_qk, false, dscore_mat);
    g.dw_qk = std::move(lq.dw);
    for (index_t l = 0; l < L; ++l)
      for (index_t c = 0; c < d; ++c) dunf(l, cq, c) += lq.dx(l, c);
  }

  // Unfold's adjoint is fold.
  g.dx = fold(dunf, H, W, window_spec(p));
  return g;
}

#define LVT_INSTANTIATE_CSA(T)                                                            \
  template struct CsaParamsT<T>;                                                          \
  template TensorT<T> csa_alpha(const TensorT<T>&, const CsaParamsT<T>&);                 \
  template TensorT<T> csa_forward(const TensorT<T>&, const CsaParamsT<T>&,                \
                                  const TensorT<T>*);                                     \
  template CsaGrads<T> csa_backward(const TensorT<T>&, const CsaParamsT<T>&,              \
                                    const TensorT<T>&, const TensorT<T>*);

LVT_INSTANTIATE_CSA(float)
LVT_INSTANTIATE_CSA(double)

#undef LVT_INSTANTIATE_CSA

}  // namespace lvt
