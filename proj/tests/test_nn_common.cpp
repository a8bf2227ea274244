// Tests for the shared building blocks: attention over tokens, spatial
// reduction of the K/V grid, the depthwise-conv feed-forward block, and
// overlapped patch embedding.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cmath>

#include "core/rng.hpp"
#include "nn/attention.hpp"
#include "nn/layers.hpp"

using namespace lvt;

namespace {

SrParamsT<float> random_sr(int dim, int ratio, Rng& rng) {
  SrParamsT<float> p;
  p.dim = dim;
  p.ratio = ratio;
  if (ratio > 1) {
    p.proj_w = rng.trunc_normal_tensor<float>({dim, dim, ratio, ratio}, 0.2);
    p.proj_b = rng.uniform_tensor<float>({dim}, -0.1, 0.1);
    p.gamma = rng.uniform_tensor<float>({dim}, 0.5, 1.5);
    p.beta = rng.uniform_tensor<float>({dim}, -0.2, 0.2);
  }
  return p;
}

}  // namespace

TEST_CASE("attention config arithmetic and validation") {
  AttentionConfig cfg;
  cfg.dim = 64;
  cfg.heads = 2;
  CHECK(cfg.head_dim() == 32);
  CHECK(cfg.logit_scale() == doctest::Approx(1.0 / std::sqrt(32.0)));

  AttentionConfig bad;
  bad.dim = 10;
  bad.heads = 3;
  CHECK_THROWS_AS(bad.validate(), ShapeError);
}

TEST_CASE("zero queries attend uniformly: output is the value column mean") {
  Rng rng(31);
  AttentionConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  Tensor q = Tensor::zeros({5, 8});
  Tensor k = rng.uniform_tensor<float>({7, 8}, -1.0, 1.0);
  Tensor v = rng.uniform_tensor<float>({7, 8}, -1.0, 1.0);
  Tensor y = scaled_dot_attention(q, k, v, cfg);
  for (index_t c = 0; c < 8; ++c) {
    double mean = 0;
    for (index_t m = 0; m < 7; ++m) mean += v(m, c);
    mean /= 7;
    for (index_t n = 0; n < 5; ++n)
      CHECK(y(n, c) == doctest::Approx(mean).epsilon(1e-5));
  }
}

TEST_CASE("a single key/value token passes through unchanged") {
  Rng rng(37);
  AttentionConfig cfg;
  cfg.dim = 6;
  cfg.heads = 3;
  Tensor q = rng.uniform_tensor<float>({4, 6}, -2.0, 2.0);
  Tensor k = rng.uniform_tensor<float>({1, 6}, -2.0, 2.0);
  Tensor v = rng.uniform_tensor<float>({1, 6}, -2.0, 2.0);
  Tensor y = scaled_dot_attention(q, k, v, cfg);
  for (index_t n = 0; n < 4; ++n)
    for (index_t c = 0; c < 6; ++c) CHECK(y(n, c) == doctest::Approx(v(0, c)).epsilon(1e-6));
}

TEST_CASE("attention_weights rows live on the simplex") {
  Rng rng(41);
  AttentionConfig cfg;
  cfg.dim = 8;
  cfg.heads = 2;
  Tensor q = rng.uniform_tensor<float>({5, 8}, -1.0, 1.0);
  Tensor k = rng.uniform_tensor<float>({6, 8}, -1.0, 1.0);
  for (int h = 0; h < 2; ++h) {
    Tensor wts = attention_weights(q, k, cfg, h);
    REQUIRE(wts.shape() == std::vector<index_t>{5, 6});
    for (index_t n = 0; n < 5; ++n) {
      double row = 0;
      for (index_t m = 0; m < 6; ++m) {
        CHECK(wts(n, m) >= 0.0f);
        row += wts(n, m);
      }
      CHECK(row == doctest::Approx(1.0).epsilon(1e-6));
    }
  }
}

TEST_CASE("spatial reduction geometry") {
  Rng rng(43);

  SUBCASE("ratio 1 bypasses projection and norm bitwise") {
    Tensor x = rng.uniform_tensor<float>({6, 5, 7}, -1.0, 1.0);
    SrParamsT<float> p = random_sr(6, 1, rng);
    Tensor tokens = spatial_reduction(x, p);
    CHECK(max_abs_diff(tokens, to_tokens(x)) == 0.0f);
    CHECK(p.param_count() == 0);
  }

  SUBCASE("ratio 4 on 28x28 gives a 7x7 token grid") {
    Tensor x = rng.uniform_tensor<float>({4, 28, 28}, -1.0, 1.0);
    SrParamsT<float> p = random_sr(4, 4, rng);
    CHECK(spatial_reduction(x, p).shape() == std::vector<index_t>{49, 4});
  }

  SUBCASE("non-divisible extents pad up: 12x10 at ratio 4 gives 3x3 tokens") {
    Tensor x = rng.uniform_tensor<float>({4, 12, 10}, -1.0, 1.0);
    SrParamsT<float> p = random_sr(4, 4, rng);
    CHECK(spatial_reduction(x, p).shape() == std::vector<index_t>{9, 4});
  }

  SUBCASE("parameter count is the conv + norm bundle") {
    SrParamsT<float> p = random_sr(8, 2, rng);
    CHECK(p.param_count() == 8 * 8 * 2 * 2 + 8 + 8 + 8);
  }
}

TEST_CASE("mix_ffn shape, parameter count, and hidden expansion") {
  Rng rng(47);
  const int d = 8, hidden = 8 * 4;
  MixFfnParamsT<float> p;
  p.dim = d;
  p.hidden = hidden;
  p.fc1_w = rng.trunc_normal_tensor<float>({hidden, d}, 0.2);
  p.fc1_b = rng.uniform_tensor<float>({hidden}, -0.1, 0.1);
  p.dw_w = rng.trunc_normal_tensor<float>({hidden, 1, 3, 3}, 0.2);
  p.dw_b = rng.uniform_tensor<float>({hidden}, -0.1, 0.1);
  p.fc2_w = rng.trunc_normal_tensor<float>({d, hidden}, 0.2);
  p.fc2_b = rng.uniform_tensor<float>({d}, -0.1, 0.1);

  CHECK(p.param_count() == index_t(hidden) * d + hidden + hidden * 9 + hidden +
                               index_t(d) * hidden + d);

  Tensor x = rng.uniform_tensor<float>({d, 6, 5}, -1.0, 1.0);
  Tensor y = mix_ffn(x, p);
  CHECK(y.shape() == x.shape());
  CHECK_NOTHROW(require_finite(y, "mix_ffn output"));

  // Wrong channel count is rejected.
  Tensor narrow = rng.uniform_tensor<float>({d - 1, 6, 5}, -1.0, 1.0);
  CHECK_THROWS_AS(mix_ffn(narrow, p), ShapeError);
}

TEST_CASE("patch embedding downsamples by its stride and normalizes channels") {
  Rng rng(53);
  PatchEmbedParamsT<float> p;
  p.in_dim = 3;
  p.out_dim = 16;
  p.spec.kernel = 7;
  p.spec.stride = 4;
  p.spec.padding = 3;
  p.proj_w = rng.trunc_normal_tensor<float>({16, 3, 7, 7}, 0.2);
  p.proj_b = rng.uniform_tensor<float>({16}, -0.1, 0.1);
  p.gamma = rng.uniform_tensor<float>({16}, 0.5, 1.5);
  p.beta = rng.uniform_tensor<float>({16}, -0.2, 0.2);

  // Stem bundle: conv weights + conv bias + norm gain + norm shift.
  CHECK(p.param_count() == index_t(16) * 3 * 49 + 16 + 16 + 16);

  Tensor x = rng.uniform_tensor<float>({3, 32, 32}, 0.0, 1.0);
  Tensor y = patch_embed(x, p);
  CHECK(y.shape() == std::vector<index_t>{16, 8, 8});

  // A k3 s2 p1 embed halves each extent, rounding up.
  PatchEmbedParamsT<float> q;
  q.in_dim = 16;
  q.out_dim = 12;
  q.spec.kernel = 3;
  q.spec.stride = 2;
  q.spec.padding = 1;
  q.proj_w = rng.trunc_normal_tensor<float>({12, 16, 3, 3}, 0.2);
  q.proj_b = rng.uniform_tensor<float>({12}, -0.1, 0.1);
  q.gamma = rng.uniform_tensor<float>({12}, 0.5, 1.5);
  q.beta = rng.uniform_tensor<float>({12}, -0.2, 0.2);
  CHECK(patch_embed(y, q).shape() == std::vector<index_t>{12, 4, 4});
}

TEST_CASE("pad_to_multiple and crop_map") {
  Rng rng(59);
  Tensor x = rng.uniform_tensor<float>({2, 5, 7}, -1.0, 1.0);

  Tensor padded = pad_to_multiple(x, 4);
  REQUIRE(padded.shape() == std::vector<index_t>{2, 8, 8});
  CHECK(padded(1, 4, 6) == x(1, 4, 6));
  CHECK(padded(0, 5, 0) == 0.0f);  // below the original rows
  CHECK(padded(0, 0, 7) == 0.0f);  // right of the original columns

  CHECK(max_abs_diff(crop_map(padded, 5, 7), x) == 0.0f);

  // Already-multiple extents come back unchanged.
  Tensor even = rng.uniform_tensor<float>({2, 8, 4}, -1.0, 1.0);
  CHECK(max_abs_diff(pad_to_multiple(even, 4), even) == 0.0f);
}
