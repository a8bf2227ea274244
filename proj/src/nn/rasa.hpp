// Atrous self-attention: the query is the sum of three SiLU-gated depthwise
// convolutions sharing a single 3x3 kernel at dilation rates 1, 3, 5; keys
// and values come from a spatially reduced token grid. The recursive wrapper
// re-applies the same layer with step input X_{t-1} + X_{t-2} and a zero
// initial hidden state, adding no parameters.
#pragma once

#include <vector>

#include "nn/attention.hpp"
#include "nn/layers.hpp"

namespace lvt {

template <typename T>
struct AsaParamsT {
  int dim = 0;
  AttentionConfig attn;               // heads over dim
  std::vector<int> dilation_rates{1, 3, 5};

  TensorT<T> w_q1;  // [d,d] 1x1 query projection
  TensorT<T> b_q1;  // [d]
  TensorT<T> w_qd;  // [d,1,3,3] the single shared dilated kernel
  TensorT<T> b_qd;  // [d] shared branch bias
  TensorT<T> w_k;   // [d,d]
  TensorT<T> b_k;   // [d]
  TensorT<T> w_v;   // [d,d]
  TensorT<T> b_v;   // [d]
  TensorT<T> w_out;  // [d,d]
  TensorT<T> b_out;  // [d]
  SrParamsT<T> sr;

  void validate() const;
  index_t param_count() const;
  /// Query-path share: w_q1 + w_qd (+ both biases).
  index_t query_param_count() const;
};

struct RasaConfig {
  int depth = 2;  // recursion count; combine weights are fixed at 1

  void validate() const {
    if (depth < 1) throw ConfigError("rasa: recursion depth must be >= 1");
  }
};

/// Multi-scale query map: Q = sum_r SiLU(depthwise(Q_hat, rate r, pad r)).
template <typename T>
TensorT<T> asa_query(const TensorT<T>& x, const AsaParamsT<T>& p);

/// One attention application: x[d,H,W] -> [d,H,W].
template <typename T>
TensorT<T> asa_forward(const TensorT<T>& x, const AsaParamsT<T>& p);

/// X_1 = ASA(X_0); X_t = ASA(X_{t-1} + X_{t-2}); returns X_depth.
template <typename T>
TensorT<T> rasa_forward(const TensorT<T>& x, const AsaParamsT<T>& p, const RasaConfig& cfg);

template <typename T>
struct AsaGrads {
  TensorT<T> dx;
  TensorT<T> dw_q1, db_q1, dw_qd, db_qd;
  TensorT<T> dw_k, db_k, dw_v, db_v, dw_out, db_out;
  SrGrads<T> sr;

  /// Elementwise addition of every gradient field (shapes must match).
  void accumulate(const AsaGrads& other, bool with_sr_params);
};

/// Analytic gradients of one ASA application.
template <typename T>
AsaGrads<T> asa_backward(const TensorT<T>& x, const AsaParamsT<T>& p, const TensorT<T>& dy);

/// Gradients through the fully unrolled recursion; shared parameters
/// accumulate across steps, the shared kernel across dilation branches.
template <typename T>
AsaGrads<T> rasa_backward(const TensorT<T>& x, const AsaParamsT<T>& p, const RasaConfig& cfg,
                          const TensorT<T>& dy);

}  // namespace lvt
