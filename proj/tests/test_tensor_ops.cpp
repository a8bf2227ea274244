// Kernel-level tests: hand-computed values, structural identities, and
// agreement with the scalar-loop oracles on fixed geometries.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>
#include <limits>

#include "core/ops.hpp"
#include "core/rng.hpp"
#include "verify/oracle.hpp"

using namespace lvt;

TEST_CASE("matmul and linear against hand values") {
  // [[1,2],[3,4]] @ [[5,6],[7,8]] = [[19,22],[43,50]]
  Tensor a({2, 2}, {1, 2, 3, 4});
  Tensor b({2, 2}, {5, 6, 7, 8});
  Tensor c = matmul(a, b);
  CHECK(c(0, 0) == doctest::Approx(19));
  CHECK(c(0, 1) == doctest::Approx(22));
  CHECK(c(1, 0) == doctest::Approx(43));
  CHECK(c(1, 1) == doctest::Approx(50));

  // linear is x @ w^T + b.
  Tensor x({1, 3}, {1, 2, 3});
  Tensor w({2, 3}, {1, 0, 0, 0, 1, 1});
  Tensor bias({2}, {10, 20});
  Tensor y = linear(x, w, &bias);
  CHECK(y(0, 0) == doctest::Approx(11));
  CHECK(y(0, 1) == doctest::Approx(25));

  CHECK_THROWS_AS(matmul(a, x), ShapeError);
}

TEST_CASE("softmax hand value, simplex rows, shift invariance") {
  // Logits (0, ln 3) -> probabilities (1/4, 3/4).
  Tensor t({1, 2}, {0.0f, std::log(3.0f)});
  Tensor p = softmax(t, 1);
  CHECK(p(0, 0) == doctest::Approx(0.25).epsilon(1e-6));
  CHECK(p(0, 1) == doctest::Approx(0.75).epsilon(1e-6));

  Rng rng(7);
  Tensor logits = rng.uniform_tensor<float>({5, 9}, -4.0, 4.0);
  Tensor probs = softmax(logits, 1);
  for (index_t i = 0; i < 5; ++i) {
    double row = 0;
    for (index_t j = 0; j < 9; ++j) {
      CHECK(probs(i, j) >= 0.0f);
      row += probs(i, j);
    }
    CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
  }

  // Adding a constant to a row must not move the distribution.
  Tensor shifted = logits;
  for (index_t j = 0; j < 9; ++j) shifted(2, j) += 3.7f;
  CHECK(max_abs_diff(softmax(shifted, 1), probs) < 1e-6f);
}

TEST_CASE("softmax_backward rows are zero-sum") {
  // softmax output lives on the simplex, so its Jacobian annihilates
  // constant directions: every gradient row must sum to ~0.
  Rng rng(21);
  Tensor y = softmax(rng.uniform_tensor<float>({4, 6}, -2.0, 2.0), 1);
  Tensor dy = rng.uniform_tensor<float>({4, 6}, -1.0, 1.0);
  Tensor dx = softmax_backward(y, dy, 1);
  for (index_t i = 0; i < 4; ++i) {
    double row = 0;
    for (index_t j = 0; j < 6; ++j) row += dx(i, j);
    CHECK(std::abs(row) < 1e-6);
  }
}

TEST_CASE("silu fixed points and asymptotes") {
  Tensor v({3}, {0.0f, 1.0f, 20.0f});
  Tensor s = silu(v);
  CHECK(s[0] == 0.0f);
  // silu(1) = sigmoid(1) = 0.731059...
  CHECK(s[1] == doctest::Approx(0.7310586).epsilon(1e-6));
  // Far right the gate saturates: silu(x) -> x.
  CHECK(std::abs(s[2] - 20.0f) < 1e-6f);
}

TEST_CASE("conv2d identity kernels reproduce the input bitwise") {
  Rng rng(3);
  Tensor x = rng.uniform_tensor<float>({4, 6, 5}, -1.0, 1.0);

  // Depthwise 3x3 one-hot at the center, p=1.
  Tensor w = Tensor::zeros({4, 1, 3, 3});
  for (index_t c = 0; c < 4; ++c) w(c, 0, 1, 1) = 1.0f;
  ConvSpec dw;
  dw.kernel = 3;
  dw.padding = 1;
  dw.groups = 4;
  Tensor y = conv2d<float>(x, w, nullptr, dw);
  CHECK(max_abs_diff(x, y) == 0.0f);

  // 1x1 identity matrix.
  Tensor eye = Tensor::zeros({4, 4, 1, 1});
  for (index_t c = 0; c < 4; ++c) eye(c, c, 0, 0) = 1.0f;
  Tensor z = conv2d<float>(x, eye, nullptr, ConvSpec{});
  CHECK(max_abs_diff(x, z) == 0.0f);
}

TEST_CASE("conv2d matches the scalar oracle, grouped and dilated") {
  Rng rng(11);
  struct Geometry {
    int cin, cout, k, s, p, r, g;
    index_t h, w;
  };
  const Geometry cases[] = {
      {3, 5, 3, 1, 1, 1, 1, 7, 6},   // plain 3x3
      {4, 4, 3, 2, 1, 1, 4, 8, 5},   // depthwise strided
      {6, 4, 3, 1, 2, 2, 2, 9, 9},   // grouped dilated
      {2, 3, 1, 1, 0, 1, 1, 4, 4},   // pointwise
  };
  for (const Geometry& g : cases) {
    CAPTURE(g.k);
    CAPTURE(g.g);
    Tensor x = rng.uniform_tensor<float>({g.cin, g.h, g.w}, -1.0, 1.0);
    Tensor w = rng.uniform_tensor<float>({g.cout, g.cin / g.g, g.k, g.k}, -0.5, 0.5);
    Tensor bias = rng.uniform_tensor<float>({g.cout}, -0.2, 0.2);
    ConvSpec spec;
    spec.kernel = g.k;
    spec.stride = g.s;
    spec.padding = g.p;
    spec.dilation = g.r;
    spec.groups = g.g;
    CHECK(max_abs_diff(conv2d(x, w, &bias, spec), oracle_conv2d(x, w, &bias, spec)) < 1e-5f);
  }
}

TEST_CASE("unfold window contents and fold adjointness") {
  Rng rng(5);
  Tensor x = rng.uniform_tensor<float>({2, 5, 5}, -1.0, 1.0);
  ConvSpec spec;
  spec.kernel = 3;
  spec.stride = 2;
  spec.padding = 1;

  Tensor u = unfold(x, spec);
  const index_t out = spec.out_extent(5);
  REQUIRE(u.shape() == std::vector<index_t>{out * out, 9, 2});

  // Window (1,1), tap (a,b)=(0,2): source pixel (2*1-1+0, 2*1-1+2) = (1,3).
  CHECK(u(1 * out + 1, 0 * 3 + 2, 0) == x(0, 1, 3));
  // Window (0,0), tap (0,0) reads padding.
  CHECK(u(0, 0, 1) == 0.0f);

  // <unfold(x), w> == <x, fold(w)> for random w: the pair is adjoint.
  Tensor w = rng.uniform_tensor<float>({out * out, 9, 2}, -1.0, 1.0);
  const float lhs = dot(u, w);
  const float rhs = dot(x, fold(w, 5, 5, spec));
  CHECK(std::abs(lhs - rhs) <= 1e-5f * (1.0f + std::abs(lhs)));

  // fold(unfold(ones)) counts the windows covering each pixel; the corner
  // of a k3 s2 p1 grid is covered exactly once.
  Tensor cover = fold(unfold(Tensor::full({1, 5, 5}, 1.0f), spec), 5, 5, spec);
  CHECK(cover(0, 0, 0) == 1.0f);
}

TEST_CASE("layer_norm standardizes each vector before the affine") {
  Rng rng(13);
  Tensor x = rng.uniform_tensor<float>({6, 8}, -3.0, 3.0);
  Tensor gamma = Tensor::full({8}, 1.0f);
  Tensor beta = Tensor::zeros({8});
  Tensor y = layer_norm(x, gamma, beta, 1e-5);
  for (index_t i = 0; i < 6; ++i) {
    double mean = 0, var = 0;
    for (index_t j = 0; j < 8; ++j) mean += y(i, j);
    mean /= 8;
    for (index_t j = 0; j < 8; ++j) var += (y(i, j) - mean) * (y(i, j) - mean);
    var /= 8;
    CHECK(std::abs(mean) < 1e-5);
    CHECK(var == doctest::Approx(1.0).epsilon(1e-3));
  }

  // gamma/beta act per channel.
  Tensor gamma2 = Tensor::full({8}, 2.0f);
  Tensor beta2 = Tensor::full({8}, 0.5f);
  Tensor y2 = layer_norm(x, gamma2, beta2, 1e-5);
  CHECK(max_abs_diff(y2, add(scale(y, 2.0f), Tensor::full({6, 8}, 0.5f))) < 1e-5f);
}

TEST_CASE("token/map layout round trips bitwise") {
  Rng rng(17);
  Tensor map = rng.uniform_tensor<float>({3, 4, 5}, -1.0, 1.0);
  Tensor tokens = to_tokens(map);
  REQUIRE(tokens.shape() == std::vector<index_t>{20, 3});
  CHECK(tokens(4 * 5 - 1, 2) == map(2, 3, 4));
  CHECK(max_abs_diff(to_map(tokens, 3, 4, 5), map) == 0.0f);
  CHECK_THROWS_AS(to_map(tokens, 3, 4, 4), ShapeError);

  Tensor m = rng.uniform_tensor<float>({3, 7}, -1.0, 1.0);
  CHECK(max_abs_diff(transpose2d(transpose2d(m)), m) == 0.0f);
}

TEST_CASE("attention oracle agreement and non-finite rejection") {
  Rng rng(23);
  AttentionConfig cfg;
  cfg.dim = 12;
  cfg.heads = 3;
  Tensor q = rng.uniform_tensor<float>({9, 12}, -1.0, 1.0);
  Tensor k = rng.uniform_tensor<float>({6, 12}, -1.0, 1.0);
  Tensor v = rng.uniform_tensor<float>({6, 12}, -1.0, 1.0);
  CHECK(max_abs_diff(scaled_dot_attention(q, k, v, cfg), oracle_attention(q, k, v, cfg)) <
        1e-5f);

  Tensor bad = q;
  bad[0] = std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(scaled_dot_attention(bad, k, v, cfg), ValueError);
}
