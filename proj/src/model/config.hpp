// Stage-table configuration: which attention layer each stage uses, its
// width/depth/heads/FFN ratio, the K/V reduction ratio and recursion depth.
#pragma once

#include <string>
#include <vector>

#include "core/error.hpp"

namespace lvt {

enum class SaType { kCsa, kRasa };

std::string to_string(SaType t);
SaType sa_type_from_string(const std::string& s);

struct StageSpec {
  SaType sa_type = SaType::kRasa;
  int layer_num = 2;
  int feature_dim = 64;
  int heads = 2;
  int mlp_ratio = 4;
  int sr_ratio = 1;         // K/V grid reduction; 1 = no reduction (RASA only)
  int recursion_depth = 2;  // RASA only

  void validate(int stage_index) const;
};

struct ModelConfig {
  std::vector<StageSpec> stages;
  int input_channels = 3;
  int num_classes = 1000;
  int image_size = 224;  // extent used for summaries and FLOPs tables

  void validate() const;

  /// Stride of the stage output relative to the input image: 4, 8, 16, 32.
  static int stage_stride(int stage_index) { return 4 << stage_index; }

  /// The canonical four-stage table: dims 64/64/160/256, layers 2/2/2/2,
  /// heads 2/2/5/8, MLP ratios 4/8/4/4, SR ratios -/4/2/1, CSA in stage 1.
  static ModelConfig lvt_default();

  static ModelConfig from_json(const std::string& text);
  static ModelConfig from_file(const std::string& path);
  std::string to_json() const;
};

}  // namespace lvt
