#include "nn/rasa.hpp"

#include <utility>

namespace lvt {

namespace {

inline ConvSpec dilated_spec(int rate, int channels) {
  ConvSpec spec;
  spec.kernel = 3;
  spec.stride = 1;
  spec.dilation = rate;
  spec.padding = ConvSpec::same_padding(3, rate);
  spec.groups = channels;  // depthwise
  return spec;
}

template <typename T>
void check_square(const TensorT<T>& w, int d, const char* name) {
  if (w.rank() != 2 || w.extent(0) != d || w.extent(1) != d) {
    throw ShapeError(std::string("asa: ") + name + " must be [d,d], got " + w.shape_str());
  }
}

}  // namespace

template <typename T>
void AsaParamsT<T>::validate() const {
  if (dim <= 0) throw ShapeError("asa: dim must be positive");
  if (attn.dim != dim) throw ShapeError("asa: attention config dim mismatch");
  attn.validate();
  if (dilation_rates.empty()) throw ShapeError("asa: need at least one dilation rate");
  for (int r : dilation_rates)
    if (r < 1) throw ShapeError("asa: dilation rates must be positive");
  check_square(w_q1, dim, "w_q1");
  check_square(w_k, dim, "w_k");
  check_square(w_v, dim, "w_v");
  check_square(w_out, dim, "w_out");
  if (w_qd.rank() != 4 || w_qd.extent(0) != dim || w_qd.extent(1) != 1 || w_qd.extent(2) != 3 ||
      w_qd.extent(3) != 3) {
    throw ShapeError("asa: w_qd must be [d,1,3,3], got " + w_qd.shape_str());
  }
  if (b_q1.numel() != dim || b_qd.numel() != dim || b_k.numel() != dim || b_v.numel() != dim ||
      b_out.numel() != dim) {
    throw ShapeError("asa: bias extents must equal d");
  }
  if (sr.dim != dim) throw ShapeError("asa: spatial-reduction dim mismatch");
}

template <typename T>
index_t AsaParamsT<T>::param_count() const {
  return query_param_count() + w_k.numel() + b_k.numel() + w_v.numel() + b_v.numel() +
         w_out.numel() + b_out.numel() + sr.param_count();
}

template <typename T>
index_t AsaParamsT<T>::query_param_count() const {
  return w_q1.numel() + b_q1.numel() + w_qd.numel() + b_qd.numel();
}

template <typename T>
TensorT<T> asa_query(const TensorT<T>& x, const AsaParamsT<T>& p) {
  p.validate();
  if (x.rank() != 3 || x.extent(0) != p.dim) {
    throw ShapeError("asa_query: expected [d,H,W] with d=" + std::to_string(p.dim) + ", got " +
                     x.shape_str());
  }
  const index_t h = x.extent(1), w = x.extent(2);
  const TensorT<T> qhat =
      to_map(linear(to_tokens(x), p.w_q1, &p.b_q1), index_t(p.dim), h, w);
  TensorT<T> q({index_t(p.dim), h, w});
  for (int rate : p.dilation_rates) {
    const TensorT<T> branch = conv2d(qhat, p.w_qd, &p.b_qd, dilated_spec(rate, p.dim));
    q = add(q, silu(branch));
  }
  return q;
}

template <typename T>
TensorT<T> asa_forward(const TensorT<T>& x, const AsaParamsT<T>& p) {
  const TensorT<T> q = asa_query(x, p);
  const TensorT<T> kv = spatial_reduction(x, p.sr);
  const TensorT<T> k = linear(kv, p.w_k, &p.b_k);
  const TensorT<T> v = linear(kv, p.w_v, &p.b_v);
  const TensorT<T> attended = scaled_dot_attention(to_tokens(q), k, v, p.attn);
  const TensorT<T> out = linear(attended, p.w_out, &p.b_out);
  return to_map(out, x.extent(0), x.extent(1), x.extent(2));
}

template <typename T>
TensorT<T> rasa_forward(const TensorT<T>& x, const AsaParamsT<T>& p, const RasaConfig& cfg) {
  cfg.validate();
  TensorT<T> prev2 = x;                  // X_0
  TensorT<T> prev = asa_forward(x, p);   // X_1
  for (int t = 2; t <= cfg.depth; ++t) {
    TensorT<T> next = asa_forward(add(prev, prev2), p);
    prev2 = std::move(prev);
    prev = std::move(next);
  }
  return prev;
}

template <typename T>
void AsaGrads<T>::accumulate(const AsaGrads& other, bool with_sr_params) {
  dx = add(dx, other.dx);
  dw_q1 = add(dw_q1, other.dw_q1);
  db_q1 = add(db_q1, other.db_q1);
  dw_qd = add(dw_qd, other.dw_qd);
  db_qd = add(db_qd, other.db_qd);
  dw_k = add(dw_k, other.dw_k);
  db_k = add(db_k, other.db_k);
  dw_v = add(dw_v, other.dw_v);
  db_v = add(db_v, other.db_v);
  dw_out = add(dw_out, other.dw_out);
  db_out = add(db_out, other.db_out);
  if (with_sr_params) {
    sr.dproj_w = add(sr.dproj_w, other.sr.dproj_w);
    sr.dproj_b = add(sr.dproj_b, other.sr.dproj_b);
    sr.dgamma = add(sr.dgamma, other.sr.dgamma);
    sr.dbeta = add(sr.dbeta, other.sr.dbeta);
  }
}

template <typename T>
AsaGrads<T> asa_backward(const TensorT<T>& x, const AsaParamsT<T>& p, const TensorT<T>& dy) {
  p.validate();
  if (!dy.same_shape(x)) {
    throw ShapeError("asa_backward: upstream " + dy.shape_str() + " vs input " + x.shape_str());
  }
  const index_t d = p.dim, h = x.extent(1), w = x.extent(2);

  // Replay the forward pass, keeping what the reverse sweep needs.
  const TensorT<T> x_tok = to_tokens(x);
  const TensorT<T> qhat_tok = linear(x_tok, p.w_q1, &p.b_q1);
  const TensorT<T> qhat = to_map(qhat_tok, d, h, w);
  std::vector<TensorT<T>> branch_pre;
  TensorT<T> q({d, h, w});
  for (int rate : p.dilation_rates) {
    branch_pre.push_back(conv2d(qhat, p.w_qd, &p.b_qd, dilated_spec(rate, p.dim)));
    q = add(q, silu(branch_pre.back()));
  }
  const TensorT<T> q_tok = to_tokens(q);
  const TensorT<T> kv = spatial_reduction(x, p.sr);
  const TensorT<T> k = linear(kv, p.w_k, &p.b_k);
  const TensorT<T> v = linear(kv, p.w_v, &p.b_v);
  const TensorT<T> attended = scaled_dot_attention(q_tok, k, v, p.attn);

  // Reverse sweep.
  AsaGrads<T> g;
  LinearGrads<T> lo = linear_backward(attended, p.w_out, true, to_tokens(dy));
  g.dw_out = std::move(lo.dw);
  g.db_out = std::move(lo.dbias);

  AttentionGrads<T> ag = scaled_dot_attention_backward(q_tok, k, v, p.attn, lo.dx);

  LinearGrads<T> lk = linear_backward(kv, p.w_k, true, ag.dk);
  LinearGrads<T> lv = linear_backward(kv, p.w_v, true, ag.dv);
  g.dw_k = std::move(lk.dw);
  g.db_k = std::move(lk.dbias);
  g.dw_v = std::move(lv.dw);
  g.db_v = std::move(lv.dbias);
  g.sr = spatial_reduction_backward(x, p.sr, add(lk.dx, lv.dx));

  // Query path: every branch shares the one kernel and bias.
  const TensorT<T> dq = to_map(ag.dq, d, h, w);
  TensorT<T> dqhat({d, h, w});
  g.dw_qd = TensorT<T>(p.w_qd.shape());
  g.db_qd = TensorT<T>(p.b_qd.shape());
  for (std::size_t i = 0; i < p.dilation_rates.size(); ++i) {
    const TensorT<T> dbranch = silu_backward(branch_pre[i], dq);
    Conv2dGrads<T> cg =
        conv2d_backward(qhat, p.w_qd, true, dilated_spec(p.dilation_rates[i], p.dim), dbranch);
    dqhat = add(dqhat, cg.dx);
    g.dw_qd = add(g.dw_qd, cg.dw);
    g.db_qd = add(g.db_qd, cg.dbias);
  }
  LinearGrads<T> lq = linear_backward(x_tok, p.w_q1, true, to_tokens(dqhat));
  g.dw_q1 = std::move(lq.dw);
  g.db_q1 = std::move(lq.dbias);

  g.dx = add(g.sr.dx, to_map(lq.dx, d, h, w));
  return g;
}

template <typename T>
AsaGrads<T> rasa_backward(const TensorT<T>& x, const AsaParamsT<T>& p, const RasaConfig& cfg,
                          const TensorT<T>& dy) {
  cfg.validate();
  if (!dy.same_shape(x)) {
    throw ShapeError("rasa_backward: upstream " + dy.shape_str() + " vs input " + x.shape_str());
  }
  // Unroll, keeping every step input: A_1 = X_0, A_t = X_{t-1} + X_{t-2}.
  std::vector<TensorT<T>> xs;  // X_0 .. X_depth
  std::vector<TensorT<T>> step_in;
  xs.push_back(x);
  for (int t = 1; t <= cfg.depth; ++t) {
    step_in.push_back(t == 1 ? xs[0] : add(xs[t - 1], xs[t - 2]));
    xs.push_back(asa_forward(step_in.back(), p));
  }

  const bool sr_params = p.sr.ratio > 1;
  std::vector<TensorT<T>> dxs(xs.size());
  for (std::size_t i = 0; i < dxs.size(); ++i) dxs[i] = TensorT<T>(x.shape());
  dxs[cfg.depth] = dy;

  AsaGrads<T> total;
  bool first = true;
  for (int t = cfg.depth; t >= 1; --t) {
    AsaGrads<T> g = asa_backward(step_in[t - 1], p, dxs[t]);
    if (t >= 2) {
      dxs[t - 1] = add(dxs[t - 1], g.dx);
      dxs[t - 2] = add(dxs[t - 2], g.dx);
    } else {
      dxs[0] = add(dxs[0], g.dx);
    }
    g.dx = TensorT<T>(x.shape());  // parameter fields are what accumulates
    if (first) {
      total = std::move(g);
      first = false;
    } else {
      total.accumulate(g, sr_params);
    }
  }
  total.dx = dxs[0];
  return total;
}

#define LVT_INSTANTIATE_RASA(T)                                                         \
  template struct AsaParamsT<T>;                                                        \
  template struct AsaGrads<T>;                                                          \
  template TensorT<T> asa_query(const TensorT<T>&, const AsaParamsT<T>&);               \
  template TensorT<T> asa_forward(const TensorT<T>&, const AsaParamsT<T>&);             \
  template TensorT<T> rasa_forward(const TensorT<T>&, const AsaParamsT<T>&,             \
                                   const RasaConfig&);                                  \
  template AsaGrads<T> asa_backward(const TensorT<T>&, const AsaParamsT<T>&,            \
                                    const TensorT<T>&);                                 \
  template AsaGrads<T> rasa_backward(const TensorT<T>&, const AsaParamsT<T>&,           \
                                     const RasaConfig&, const TensorT<T>&);

LVT_INSTANTIATE_RASA(float)
LVT_INSTANTIATE_RASA(double)

#undef LVT_INSTANTIATE_RASA

}  // namespace lvt
