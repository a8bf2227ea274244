// Config-driven assembly of the four-stage backbone: overlapped patch embeds
// between stages, pre-norm residual blocks (attention + feed-forward), a
// global-average-pool + linear classification head, plus parameter and
// MAC accounting and weight (de)serialization.
#pragma once

#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "model/config.hpp"
#include "model/weight_store.hpp"
#include "nn/csa.hpp"
#include "nn/layers.hpp"
#include "nn/rasa.hpp"

namespace lvt {

struct Block {
  SaType kind = SaType::kRasa;
  Tensor norm1_gamma, norm1_beta;
  CsaParamsT<float> csa;     // populated when kind == kCsa
  AsaParamsT<float> rasa;    // populated when kind == kRasa
  RasaConfig rasa_cfg;
  Tensor norm2_gamma, norm2_beta;
  MixFfnParamsT<float> ffn;
};

struct Stage {
  StageSpec spec;
  PatchEmbedParamsT<float> embed;
  std::vector<Block> blocks;
};

struct CountReport {
  struct Row {
    std::string path;
    index_t params = 0;
    bool is_bias = false;  // additive parameters (biases and norm shifts)
  };
  std::vector<Row> rows;  // one per parameter tensor, registration order
  index_t encoder_weights = 0;
  index_t encoder_biases = 0;
  index_t head_params = 0;

  index_t encoder_total() const { return encoder_weights + encoder_biases; }
  index_t total() const { return encoder_total() + head_params; }
  std::string to_json() const;
};

struct FlopsReport {
  struct Row {
    std::string path;
    std::uint64_t macs = 0;
  };
  std::vector<Row> rows;  // one per module
  std::uint64_t encoder_macs = 0;
  std::uint64_t head_macs = 0;
  index_t height = 0, width = 0;  // padded extents the walk used

  std::uint64_t total() const { return encoder_macs + head_macs; }
  std::string to_json() const;
};

class Model {
 public:
  /// Streams are at least 32 pixels per side and get zero-padded on the
  /// bottom/right to a multiple of 32; returned maps are cropped to
  /// ceil(extent/stride). Accepts [C,H,W] or [B,C,H,W].
  std::vector<Tensor> forward_features(const Tensor& image) const;

  /// Pools the last stage map and projects to classes: [num_classes] or
  /// [B,num_classes]. Requires num_classes > 0.
  Tensor forward_classify(const Tensor& image) const;

  CountReport count_params() const;

  /// Analytic MAC walk for one [C,height,width] forward; mirrors the padded
  /// geometry the real forward uses, so it matches the instrumented counter.
  FlopsReport estimate_flops(index_t height, index_t width) const;

  WeightStore to_store() const;
  void bind_from_store(const WeightStore& store);
  void save_weights(const std::string& path) const;
  void load_weights(const std::string& path);

  const ModelConfig& config() const { return cfg_; }
  bool has_head() const { return cfg_.num_classes > 0; }

  /// Visits every parameter tensor as (name, tensor) in registration order.
  void for_each_param(const std::function<void(const std::string&, Tensor&)>& fn);
  void for_each_param(const std::function<void(const std::string&, const Tensor&)>& fn) const;

  ModelConfig cfg_;
  std::vector<Stage> stages_;
  Tensor head_w, head_b;
};

/// Allocates and reproducibly initializes all parameters: truncated normal
/// (std 0.02) for projection weights, zeros for biases and norm shifts,
/// ones for norm gains.
Model build_model(const ModelConfig& cfg, std::uint64_t seed);

}  // namespace lvt
