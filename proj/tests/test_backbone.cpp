// Backbone assembly tests: configuration handling, stage geometry, batch
// semantics, parameter/MAC accounting, and weight serialization.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdio>
#include <fstream>
#include <string>

#include "core/profile.hpp"
#include "core/rng.hpp"
#include "model/model.hpp"

using namespace lvt;

namespace {

// Two-stage desk-scale model: CSA stage then RASA stage.
ModelConfig toy_config() {
  ModelConfig cfg;
  StageSpec s1;
  s1.sa_type = SaType::kCsa;
  s1.layer_num = 1;
  s1.feature_dim = 8;
  s1.heads = 2;
  s1.mlp_ratio = 2;
  StageSpec s2;
  s2.sa_type = SaType::kRasa;
  s2.layer_num = 1;
  s2.feature_dim = 12;
  s2.heads = 2;
  s2.mlp_ratio = 2;
  s2.sr_ratio = 2;
  cfg.stages = {s1, s2};
  cfg.num_classes = 10;
  cfg.image_size = 32;
  return cfg;
}

std::string temp_path(const char* tag) {
  return std::string("/tmp/lvt_test_") + tag + ".lvtw";
}

}  // namespace

TEST_CASE("default configuration matches the published stage table") {
  ModelConfig cfg = ModelConfig::lvt_default();
  REQUIRE(cfg.stages.size() == 4);
  CHECK(cfg.stages[0].sa_type == SaType::kCsa);
  const int dims[] = {64, 64, 160, 256};
  const int heads[] = {2, 2, 5, 8};
  const int mlp[] = {4, 8, 4, 4};
  const int sr[] = {1, 4, 2, 1};
  for (int i = 0; i < 4; ++i) {
    CAPTURE(i);
    CHECK(cfg.stages[i].layer_num == 2);
    CHECK(cfg.stages[i].feature_dim == dims[i]);
    CHECK(cfg.stages[i].heads == heads[i]);
    CHECK(cfg.stages[i].mlp_ratio == mlp[i]);
    if (cfg.stages[i].sa_type == SaType::kRasa) CHECK(cfg.stages[i].sr_ratio == sr[i]);
    CHECK(ModelConfig::stage_stride(i) == 4 << i);
  }
  CHECK(cfg.num_classes == 1000);
  CHECK(cfg.image_size == 224);

  // JSON round trip preserves the table.
  ModelConfig back = ModelConfig::from_json(cfg.to_json());
  CHECK(back.to_json() == cfg.to_json());
}

TEST_CASE("configuration validation rejects malformed tables") {
  CHECK_THROWS_AS(ModelConfig::from_json("not json"), ConfigError);
  CHECK_THROWS_AS(ModelConfig::from_json("{\"stages\": []}"), ConfigError);
  CHECK_THROWS_AS(
      ModelConfig::from_json(
          "{\"stages\": [{\"sa_type\": \"outlook\", \"layer_num\": 1, \"feature_dim\": 8, "
          "\"heads\": 2, \"mlp_ratio\": 2}]}"),
      ConfigError);
  // feature_dim must split evenly across heads.
  CHECK_THROWS_AS(
      ModelConfig::from_json(
          "{\"stages\": [{\"sa_type\": \"RASA\", \"layer_num\": 1, \"feature_dim\": 10, "
          "\"heads\": 3, \"mlp_ratio\": 2}]}"),
      ConfigError);
}

TEST_CASE("defaults parameter and head accounting") {
  Model model = build_model(ModelConfig::lvt_default(), 7);
  CountReport report = model.count_params();

  // Head: 256 -> 1000 linear with bias.
  CHECK(report.head_params == 256 * 1000 + 1000);
  CHECK(report.head_params == 257000);
  CHECK(report.encoder_total() == report.encoder_weights + report.encoder_biases);
  CHECK(report.total() == report.encoder_total() + report.head_params);

  // The row table tallies to the same totals.
  index_t rows = 0;
  for (const CountReport::Row& row : report.rows) rows += row.params;
  CHECK(rows == report.total());
}

TEST_CASE("toy model stage geometry and batch semantics") {
  Model model = build_model(toy_config(), 11);
  Rng rng(17);

  Tensor image = rng.uniform_tensor<float>({3, 32, 32}, 0.0, 1.0);
  std::vector<Tensor> maps = model.forward_features(image);
  REQUIRE(maps.size() == 2);
  CHECK(maps[0].shape() == std::vector<index_t>{8, 8, 8});
  CHECK(maps[1].shape() == std::vector<index_t>{12, 4, 4});

  Tensor logits = model.forward_classify(image);
  CHECK(logits.shape() == std::vector<index_t>{10});

  // A batch is the stack of its singles, bitwise.
  Tensor batch = rng.uniform_tensor<float>({2, 3, 32, 32}, 0.0, 1.0);
  std::vector<Tensor> batch_maps = model.forward_features(batch);
  REQUIRE(batch_maps.size() == 2);
  CHECK(batch_maps[0].shape() == std::vector<index_t>{2, 8, 8, 8});
  for (index_t b = 0; b < 2; ++b) {
    Tensor single({3, 32, 32});
    for (index_t i = 0; i < single.numel(); ++i) single[i] = batch[b * single.numel() + i];
    std::vector<Tensor> one = model.forward_features(single);
    for (index_t i = 0; i < one[1].numel(); ++i)
      CHECK(batch_maps[1][b * one[1].numel() + i] == one[1][i]);
  }

  Tensor batch_logits = model.forward_classify(batch);
  CHECK(batch_logits.shape() == std::vector<index_t>{2, 10});
}

TEST_CASE("inputs that are not multiples of 32 are padded, small ones rejected") {
  Model model = build_model(toy_config(), 13);
  Rng rng(19);

  // 50x70 pads to 64x96; maps crop back to ceil(extent/stride).
  Tensor odd = rng.uniform_tensor<float>({3, 50, 70}, 0.0, 1.0);
  std::vector<Tensor> maps = model.forward_features(odd);
  CHECK(maps[0].shape() == std::vector<index_t>{8, 13, 18});
  CHECK(maps[1].shape() == std::vector<index_t>{12, 7, 9});

  Tensor tiny = rng.uniform_tensor<float>({3, 31, 31}, 0.0, 1.0);
  CHECK_THROWS_AS(model.forward_features(tiny), ShapeError);
}

TEST_CASE("weight serialization round-trips bitwise and rejects corruption") {
  Model model = build_model(toy_config(), 23);
  Rng rng(29);
  Tensor image = rng.uniform_tensor<float>({3, 32, 32}, 0.0, 1.0);
  Tensor before = model.forward_classify(image);

  const std::string path = temp_path("roundtrip");
  model.save_weights(path);

  Model fresh = build_model(toy_config(), 999);  // different init
  fresh.load_weights(path);
  Tensor after = fresh.forward_classify(image);
  CHECK(max_abs_diff(before, after) == 0.0f);

  // Structural corruption (magic) and payload corruption (CRC) raise
  // distinct error types.
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::string bad_magic = bytes;
  bad_magic[0] = 'X';
  const std::string magic_path = temp_path("magic");
  std::ofstream(magic_path, std::ios::binary) << bad_magic;
  CHECK_THROWS_AS(fresh.load_weights(magic_path), FormatError);

  std::string bad_payload = bytes;
  bad_payload[bad_payload.size() - 5] ^= 0x40;  // last data byte, CRC intact
  const std::string crc_path = temp_path("crc");
  std::ofstream(crc_path, std::ios::binary) << bad_payload;
  CHECK_THROWS_AS(fresh.load_weights(crc_path), ChecksumError);

  const std::string trunc_path = temp_path("trunc");
  std::ofstream(trunc_path, std::ios::binary) << bytes.substr(0, bytes.size() / 2);
  CHECK_THROWS_AS(fresh.load_weights(trunc_path), FormatError);

  CHECK_THROWS_AS(fresh.load_weights("/nonexistent/dir/weights.lvtw"), IoError);

  for (const std::string& p : {path, magic_path, crc_path, trunc_path})
    std::remove(p.c_str());
}

TEST_CASE("store binding is name-checked") {
  Model model = build_model(toy_config(), 31);
  WeightStore store = model.to_store();
  CHECK(store.size() > 0);

  // Every parameter row appears in the store under its registration name.
  CountReport report = model.count_params();
  for (const CountReport::Row& row : report.rows) CHECK(store.contains(row.path));

  // Binding the model's own store back reproduces its outputs bitwise.
  Rng rng(37);
  Tensor image = rng.uniform_tensor<float>({3, 32, 32}, 0.0, 1.0);
  Tensor before = model.forward_classify(image);
  model.bind_from_store(store);
  CHECK(max_abs_diff(before, model.forward_classify(image)) == 0.0f);

  // An unknown tensor name is structural corruption.
  WeightStore extra = model.to_store();
  extra.put("stage9.bogus", Tensor::zeros({1}));
  CHECK_THROWS_AS(model.bind_from_store(extra), FormatError);
}

TEST_CASE("analytic MAC walk equals the instrumented counter") {
  Model model = build_model(toy_config(), 41);
  FlopsReport flops = model.estimate_flops(32, 32);

  Rng rng(43);
  Tensor image = rng.uniform_tensor<float>({3, 32, 32}, 0.0, 1.0);
  mac_count_reset();
  (void)model.forward_classify(image);
  const std::uint64_t counted = mac_count_read();
  mac_count_reset();

  CHECK(counted == flops.total());

  // Row tally equals the encoder+head split.
  std::uint64_t rows = 0;
  for (const FlopsReport::Row& row : flops.rows) rows += row.macs;
  CHECK(rows == flops.total());
}
