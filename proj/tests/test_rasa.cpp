// Atrous self-attention and its recursive wrapper: shared-kernel query
// branches, K/V reduction geometry, recursion semantics, parameter
// invariance across depths, and oracle/gradient agreement.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "core/rng.hpp"
#include "nn/rasa.hpp"
#include "verify/gradcheck.hpp"
#include "verify/oracle.hpp"

using namespace lvt;

namespace {

template <typename T>
AsaParamsT<T> random_asa(int dim, int heads, int ratio, Rng& rng) {
  AsaParamsT<T> p;
  p.dim = dim;
  p.attn.dim = dim;
  p.attn.heads = heads;
  p.w_q1 = rng.template trunc_normal_tensor<T>({dim, dim}, 0.2);
  p.b_q1 = rng.template uniform_tensor<T>({dim}, -0.1, 0.1);
  p.w_qd = rng.template trunc_normal_tensor<T>({dim, 1, 3, 3}, 0.2);
  p.b_qd = rng.template uniform_tensor<T>({dim}, -0.1, 0.1);
  p.w_k = rng.template trunc_normal_tensor<T>({dim, dim}, 0.2);
  p.b_k = rng.template uniform_tensor<T>({dim}, -0.1, 0.1);
  p.w_v = rng.template trunc_normal_tensor<T>({dim, dim}, 0.2);
  p.b_v = rng.template uniform_tensor<T>({dim}, -0.1, 0.1);
  p.w_out = rng.template trunc_normal_tensor<T>({dim, dim}, 0.2);
  p.b_out = rng.template uniform_tensor<T>({dim}, -0.1, 0.1);
  p.sr.dim = dim;
  p.sr.ratio = ratio;
  if (ratio > 1) {
    p.sr.proj_w = rng.template trunc_normal_tensor<T>({dim, dim, ratio, ratio}, 0.2);
    p.sr.proj_b = rng.template uniform_tensor<T>({dim}, -0.1, 0.1);
    p.sr.gamma = rng.template uniform_tensor<T>({dim}, 0.5, 1.5);
    p.sr.beta = rng.template uniform_tensor<T>({dim}, -0.2, 0.2);
  }
  return p;
}

}  // namespace

TEST_CASE("query path owns d*d + 9*d weights plus two bias vectors") {
  Rng rng(101);
  AsaParamsT<float> p = random_asa<float>(64, 2, 1, rng);
  CHECK(p.query_param_count() == 64 * 64 + 9 * 64 + 64 + 64);
  CHECK(p.query_param_count() == 4800);

  // Full layer at ratio 1: four d*d projections, the shared kernel, five
  // bias vectors, no reduction parameters.
  AsaParamsT<float> q = random_asa<float>(16, 2, 1, rng);
  CHECK(q.param_count() == 4 * 16 * 16 + 9 * 16 + 5 * 16);
}

TEST_CASE("all dilation branches read the single stored kernel") {
  Rng rng(103);
  const int d = 6;
  AsaParamsT<double> p = random_asa<double>(d, 2, 1, rng);
  TensorT<double> x = rng.trunc_normal_tensor<double>({d, 10, 10}, 1.0);

  auto branch = [&](const AsaParamsT<double>& q, int rate) {
    TensorT<double> qhat = to_map(linear(to_tokens(x), q.w_q1, &q.b_q1), d, 10, 10);
    ConvSpec spec;
    spec.kernel = 3;
    spec.dilation = rate;
    spec.padding = ConvSpec::same_padding(3, rate);
    spec.groups = d;
    return silu(conv2d(qhat, q.w_qd, &q.b_qd, spec));
  };

  // The query is the sum of the three branches.
  TensorT<double> manual = add(add(branch(p, 1), branch(p, 3)), branch(p, 5));
  TensorT<double> q = asa_query(x, p);
  CHECK(max_abs_diff(q, manual) < 1e-9 * (1.0 + max_abs(manual)));

  // One kernel entry moved -> every branch output moves.
  AsaParamsT<double> bumped = p;
  bumped.w_qd(2, 0, 0, 1) += 0.05;
  for (int rate : {1, 3, 5}) {
    CAPTURE(rate);
    CHECK(max_abs_diff(branch(bumped, rate), branch(p, rate)) > 0.0);
  }
}

TEST_CASE("recursion: depth 1 is the plain layer, depth 2 composes explicitly") {
  Rng rng(107);
  const int d = 8;
  AsaParamsT<float> p = random_asa<float>(d, 2, 2, rng);
  Tensor x = rng.trunc_normal_tensor<float>({d, 9, 7}, 1.0);

  RasaConfig depth1{1};
  CHECK(max_abs_diff(rasa_forward(x, p, depth1), asa_forward(x, p)) == 0.0f);

  // X_2 = ASA(X_1 + X_0) with X_1 = ASA(X_0).
  RasaConfig depth2{2};
  Tensor x1 = asa_forward(x, p);
  Tensor expect = asa_forward(add(x1, x), p);
  CHECK(max_abs_diff(rasa_forward(x, p, depth2), expect) <= 1e-6f);

  RasaConfig bad{0};
  CHECK_THROWS_AS(bad.validate(), ConfigError);
}

TEST_CASE("recursion depth never adds parameters") {
  Rng rng(109);
  AsaParamsT<float> p = random_asa<float>(12, 2, 2, rng);
  const index_t once = p.param_count();
  // The recursion reuses the same parameter struct at every step; its count
  // is a function of the layer, not of RasaConfig.
  for (int depth = 1; depth <= 4; ++depth) {
    RasaConfig cfg{depth};
    cfg.validate();
    CHECK(p.param_count() == once);
  }
}

TEST_CASE("K/V reduction geometry inside the layer") {
  Rng rng(113);

  SUBCASE("ratio 1 keeps the full token grid") {
    AsaParamsT<float> p = random_asa<float>(8, 2, 1, rng);
    Tensor x = rng.trunc_normal_tensor<float>({8, 6, 5}, 1.0);
    CHECK(asa_forward(x, p).shape() == x.shape());
    CHECK(p.sr.param_count() == 0);
  }

  SUBCASE("ratio 4 on 28x28 reduces keys/values to 49 tokens") {
    AsaParamsT<float> p = random_asa<float>(4, 2, 4, rng);
    Tensor x = rng.trunc_normal_tensor<float>({4, 28, 28}, 1.0);
    CHECK(spatial_reduction(x, p.sr).shape() == std::vector<index_t>{49, 4});
    CHECK(asa_forward(x, p).shape() == x.shape());
  }

  SUBCASE("uneven extents pad up before reducing") {
    AsaParamsT<float> p = random_asa<float>(4, 1, 2, rng);
    Tensor x = rng.trunc_normal_tensor<float>({4, 7, 9}, 1.0);
    CHECK(spatial_reduction(x, p.sr).shape() == std::vector<index_t>{20, 4});
    CHECK(asa_forward(x, p).shape() == x.shape());
  }
}

TEST_CASE("fast path agrees with the scalar oracle") {
  Rng rng(127);
  for (int trial = 0; trial < 5; ++trial) {
    const int ratio = 1 + trial % 3;
    AsaParamsT<double> p = random_asa<double>(8, 2, ratio, rng);
    TensorT<double> x = rng.trunc_normal_tensor<double>({8, 7, 9}, 1.0);
    TensorT<double> fast = asa_forward(x, p);
    TensorT<double> slow = oracle_asa(x, p);
    CHECK(max_abs_diff(fast, slow) < 1e-9 * (1.0 + max_abs(slow)));
  }
}

TEST_CASE("analytic input gradient matches central differences through depth 2") {
  Rng rng(131);
  AsaParamsT<double> p = random_asa<double>(4, 2, 2, rng);
  RasaConfig cfg{2};
  TensorT<double> x = rng.trunc_normal_tensor<double>({4, 5, 6}, 0.5);
  TensorT<double> proj = rng.trunc_normal_tensor<double>({4, 5, 6}, 1.0);

  AsaGrads<double> grads = rasa_backward(x, p, cfg, proj);
  TensorT<double> fd = finite_diff_grad(
      [&](const TensorT<double>& xv) { return dot(rasa_forward(xv, p, cfg), proj); }, x, 1e-5);
  CHECK(max_rel_err(grads.dx, fd, 1e-5) < 1e-4);
}

TEST_CASE("shape and head mismatches are rejected") {
  Rng rng(137);
  AsaParamsT<float> p = random_asa<float>(8, 2, 1, rng);
  Tensor wrong = rng.trunc_normal_tensor<float>({7, 6, 6}, 1.0);
  CHECK_THROWS_AS(asa_forward(wrong, p), ShapeError);

  AsaParamsT<float> bad = random_asa<float>(8, 2, 1, rng);
  bad.attn.heads = 3;  // 8 % 3 != 0
  Tensor x = rng.trunc_normal_tensor<float>({8, 6, 6}, 1.0);
  CHECK_THROWS_AS(asa_forward(x, bad), ShapeError);
}
