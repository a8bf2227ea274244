// Convolutional self-attention tests: parameter bookkeeping, the two
// degenerate forms (frozen weights -> convolution, tied projections ->
// windowed attention), window locality, and oracle/gradient agreement.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "core/rng.hpp"
#include "nn/csa.hpp"
#include "verify/gradcheck.hpp"
#include "verify/oracle.hpp"

using namespace lvt;

namespace {

template <typename T>
CsaParamsT<T> random_csa(int dim, int heads, Rng& rng) {
  CsaParamsT<T> p;
  p.dim = dim;
  p.heads = heads;
  const index_t k2 = index_t(p.kernel) * p.kernel;
  const index_t dh = p.head_dim();
  p.w_filter = rng.template trunc_normal_tensor<T>({k2, heads, dh, dh}, 0.2);
  p.w_qk = rng.template trunc_normal_tensor<T>({heads * k2 * k2, dim}, 0.2);
  p.w_out = rng.template trunc_normal_tensor<T>({dim, dim}, 0.2);
  return p;
}

}  // namespace

TEST_CASE("parameter count: per-position projections + score weights + output") {
  Rng rng(61);
  CsaParamsT<float> p = random_csa<float>(64, 2, rng);
  // 9 position projections of 32x32 per head, 2*81 score rows of width 64,
  // and the 64x64 head-mixing output. No biases anywhere in this layer.
  CHECK(p.param_count() == 9 * 2 * 32 * 32 + 2 * 81 * 64 + 64 * 64);
  CHECK(p.param_count() == 32896);
  CHECK(p.padding() == 1);
  CHECK(p.head_dim() == 32);
}

TEST_CASE("predicted weights form a simplex per window and head") {
  Rng rng(67);
  CsaParamsT<float> p = random_csa<float>(8, 2, rng);
  Tensor centers = rng.uniform_tensor<float>({6, 8}, -1.0, 1.0);
  Tensor alpha = csa_alpha(centers, p);
  REQUIRE(alpha.shape() == std::vector<index_t>{6, 2, 9, 9});
  for (index_t l = 0; l < 6; ++l)
    for (index_t h = 0; h < 2; ++h)
      for (index_t i = 0; i < 9; ++i) {
        double row = 0;
        for (index_t j = 0; j < 9; ++j) {
          CHECK(alpha(l, h, i, j) >= 0.0f);
          row += alpha(l, h, i, j);
        }
        CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
      }

  // Zero score weights give exactly uniform attention.
  p.w_qk = Tensor::zeros(p.w_qk.shape());
  Tensor uniform = csa_alpha(centers, p);
  for (index_t i = 0; i < uniform.numel(); ++i)
    CHECK(std::abs(uniform[i] - 1.0f / 9.0f) < 1e-7f);
}

TEST_CASE("frozen weights reduce the layer to a strided grouped convolution") {
  Rng rng(71);
  const int d = 8, heads = 2, dh = 4;
  CsaParamsT<double> p;
  p.dim = d;
  p.heads = heads;
  p.w_filter = rng.trunc_normal_tensor<double>({9, heads, dh, dh}, 0.2);
  p.w_qk = rng.trunc_normal_tensor<double>({heads * 81, d}, 0.2);
  p.w_out = TensorT<double>::eye(d);
  TensorT<double> x = rng.trunc_normal_tensor<double>({d, 10, 12}, 1.0);

  TensorT<double> ones = TensorT<double>::full({5 * 6, heads, 9, 9}, 1.0);
  TensorT<double> y = csa_forward(x, p, &ones);

  // The window-position projections laid out as a grouped conv kernel.
  TensorT<double> wconv({d, dh, 3, 3});
  for (index_t h = 0; h < heads; ++h)
    for (index_t c = 0; c < dh; ++c)
      for (index_t e = 0; e < dh; ++e)
        for (index_t a = 0; a < 3; ++a)
          for (index_t b = 0; b < 3; ++b) wconv(h * dh + c, e, a, b) = p.w_filter(a * 3 + b, h, c, e);
  ConvSpec spec;
  spec.kernel = 3;
  spec.stride = 2;
  spec.padding = 1;
  spec.groups = heads;
  TensorT<double> yc = oracle_conv2d<double>(x, wconv, nullptr, spec);

  // Window centers land on the even positions and receive exactly one
  // window's contribution.
  for (index_t c = 0; c < d; ++c)
    for (index_t a = 0; a < yc.extent(1); ++a)
      for (index_t b = 0; b < yc.extent(2); ++b)
        CHECK(y(c, 2 * a, 2 * b) == doctest::Approx(yc(c, a, b)).epsilon(1e-9));
}

TEST_CASE("tied projections reduce the layer to windowed attention") {
  Rng rng(73);
  CsaParamsT<double> p;
  p.dim = 8;
  p.heads = 2;
  p.w_filter = rng.trunc_normal_tensor<double>({9, 2, 4, 4}, 0.2);
  p.w_qk = rng.trunc_normal_tensor<double>({2 * 81, 8}, 0.2);
  p.w_out = rng.trunc_normal_tensor<double>({8, 8}, 0.2);
  for (index_t j = 1; j < 9; ++j)
    for (index_t h = 0; h < 2; ++h)
      for (index_t c = 0; c < 4; ++c)
        for (index_t e = 0; e < 4; ++e) p.w_filter(j, h, c, e) = p.w_filter(0, h, c, e);

  TensorT<double> x = rng.trunc_normal_tensor<double>({8, 9, 11}, 1.0);
  TensorT<double> ref = oracle_windowed_attention(x, p);
  CHECK(max_abs_diff(csa_forward(x, p), ref) < 1e-9 * (1.0 + max_abs(ref)));
}

TEST_CASE("window geometry and receptive-field locality") {
  Rng rng(79);
  CsaParamsT<double> p = random_csa<double>(8, 2, rng);
  TensorT<double> x = rng.trunc_normal_tensor<double>({8, 16, 16}, 1.0);
  TensorT<double> base = csa_forward(x, p);
  CHECK(base.shape() == x.shape());

  const index_t pi = 7, pj = 8;
  auto probe_diff = [&](index_t bi, index_t bj) {
    TensorT<double> bumped = x;
    bumped(0, bi, bj) += 5.0;
    TensorT<double> y = csa_forward(bumped, p);
    double diff = 0;
    for (index_t c = 0; c < 8; ++c)
      diff = std::max(diff, std::abs(y(c, pi, pj) - base(c, pi, pj)));
    return diff;
  };

  // Every window covering (7,8) sits within Chebyshev distance 2; farther
  // perturbations cannot reach the probe at all.
  CHECK(probe_diff(10, 8) == 0.0);
  CHECK(probe_diff(7, 11) == 0.0);
  CHECK(probe_diff(15, 15) == 0.0);
  CHECK(probe_diff(9, 8) > 0.0);
}

TEST_CASE("fast path agrees with the window-by-window oracle") {
  Rng rng(83);
  for (int trial = 0; trial < 5; ++trial) {
    CsaParamsT<double> p = random_csa<double>(8, 2, rng);
    TensorT<double> x = rng.trunc_normal_tensor<double>({8, 7, 9}, 1.0);
    TensorT<double> fast = csa_forward(x, p);
    TensorT<double> slow = oracle_csa(x, p);
    CHECK(max_abs_diff(fast, slow) < 1e-9 * (1.0 + max_abs(slow)));
  }
}

TEST_CASE("alpha override is validated and replaces prediction") {
  Rng rng(89);
  CsaParamsT<double> p = random_csa<double>(4, 1, rng);
  TensorT<double> x = rng.trunc_normal_tensor<double>({4, 6, 6}, 1.0);

  TensorT<double> wrong = TensorT<double>::full({2, 1, 9, 9}, 1.0);  // L should be 9
  CHECK_THROWS_AS(csa_forward(x, p, &wrong), ShapeError);

  // Overridden weights are used as-is: the score parameters become inert.
  TensorT<double> alpha = rng.uniform_tensor<double>({9, 1, 9, 9}, 0.0, 1.0);
  TensorT<double> y1 = csa_forward(x, p, &alpha);
  p.w_qk = rng.trunc_normal_tensor<double>({81, 4}, 0.5);
  TensorT<double> y2 = csa_forward(x, p, &alpha);
  CHECK(max_abs_diff(y1, y2) == 0.0);
}

TEST_CASE("analytic input gradient matches central differences") {
  Rng rng(97);
  CsaParamsT<double> p = random_csa<double>(4, 2, rng);
  TensorT<double> x = rng.trunc_normal_tensor<double>({4, 5, 6}, 0.5);
  TensorT<double> proj = rng.trunc_normal_tensor<double>({4, 5, 6}, 1.0);

  CsaGrads<double> grads = csa_backward(x, p, proj);
  TensorT<double> fd = finite_diff_grad(
      [&](const TensorT<double>& xv) { return dot(csa_forward(xv, p), proj); }, x, 1e-5);
  CHECK(max_rel_err(grads.dx, fd, 1e-5) < 1e-4);
}
