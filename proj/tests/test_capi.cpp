// Tests of the shared library's C boundary: status mapping, last-error
// reporting, handle lifecycle, and byte-stable behavior through the API.
// This file deliberately includes only lvt/lvt.h plus presentation headers.
#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include "doctest.h"

#include <cstdint>
#include <cstdio>
#include <cstring>
#include <fstream>
#include <string>
#include <vector>

#include "json.hpp"
#include "lvt/lvt.h"

namespace {

const char* kToyConfig = R"json({
  "input_channels": 3,
  "num_classes": 10,
  "image_size": 32,
  "stages": [
    {"sa_type": "CSA",  "layer_num": 1, "feature_dim": 8,  "heads": 2, "mlp_ratio": 2},
    {"sa_type": "RASA", "layer_num": 1, "feature_dim": 12, "heads": 2, "mlp_ratio": 2,
     "sr_ratio": 2, "recursion_depth": 2}
  ]
})json";

struct ModelGuard {
  lvt_model* m = nullptr;
  ~ModelGuard() { lvt_model_free(m); }
};

struct TensorGuard {
  lvt_tensor* t = nullptr;
  ~TensorGuard() { lvt_tensor_free(t); }
};

}  // namespace

TEST_CASE("version and status names are stable strings") {
  CHECK(std::string(lvt_version()) == "1.0.0");
  CHECK(std::string(lvt_status_name(LVT_OK)) == "LVT_OK");
  CHECK(std::string(lvt_status_name(LVT_ERROR_CHECKSUM)) == "LVT_ERROR_CHECKSUM");
}

TEST_CASE("null arguments are rejected without touching outputs") {
  lvt_model* model = reinterpret_cast<lvt_model*>(0x1);
  CHECK(lvt_model_create(nullptr, 0, &model) == LVT_ERROR_INVALID_ARGUMENT);
  CHECK(model == reinterpret_cast<lvt_model*>(0x1));  // untouched on failure
  CHECK(std::string(lvt_last_error()).find("null argument") != std::string::npos);

  CHECK(lvt_model_load_weights(nullptr, "x") == LVT_ERROR_INVALID_ARGUMENT);
  CHECK(lvt_tensor_create(nullptr, 1, nullptr, nullptr) == LVT_ERROR_INVALID_ARGUMENT);
  CHECK(lvt_run_checks_json(nullptr, 0, 0, nullptr) == LVT_ERROR_INVALID_ARGUMENT);
}

TEST_CASE("configuration errors carry a message") {
  ModelGuard g;
  CHECK(lvt_model_create("{\"stages\": []}", 1, &g.m) == LVT_ERROR_CONFIG);
  CHECK(std::strlen(lvt_last_error()) > 0);
  CHECK(lvt_model_create("not json", 1, &g.m) == LVT_ERROR_CONFIG);
  CHECK(lvt_model_create_from_file("/nonexistent/config.json", 1, &g.m) == LVT_ERROR_IO);
}

TEST_CASE("model lifecycle: create, describe, forward, classify") {
  ModelGuard g;
  REQUIRE(lvt_model_create(kToyConfig, 42, &g.m) == LVT_OK);

  char* text = nullptr;
  REQUIRE(lvt_model_config_json(g.m, &text) == LVT_OK);
  nlohmann::json cfg = nlohmann::json::parse(text);
  lvt_string_free(text);
  CHECK(cfg.at("num_classes").get<int>() == 10);
  CHECK(cfg.at("stages").size() == 2);

  REQUIRE(lvt_model_count_params_json(g.m, &text) == LVT_OK);
  nlohmann::json params = nlohmann::json::parse(text);
  lvt_string_free(text);
  CHECK(params.at("total").get<std::int64_t>() ==
        params.at("encoder_total").get<std::int64_t>() +
            params.at("head_params").get<std::int64_t>());
  CHECK(params.at("head_params").get<std::int64_t>() == 12 * 10 + 10);

  REQUIRE(lvt_model_estimate_flops_json(g.m, 32, 32, &text) == LVT_OK);
  nlohmann::json flops = nlohmann::json::parse(text);
  lvt_string_free(text);
  CHECK(flops.at("total_macs").get<std::int64_t>() > 0);
  CHECK(lvt_model_estimate_flops_json(g.m, 0, 32, &text) == LVT_ERROR_SHAPE);

  const int64_t extents[3] = {3, 32, 32};
  TensorGuard input;
  REQUIRE(lvt_tensor_random(extents, 3, 7, &input.t) == LVT_OK);

  lvt_tensor** maps = nullptr;
  size_t count = 0;
  REQUIRE(lvt_model_forward_features(g.m, input.t, &maps, &count) == LVT_OK);
  REQUIRE(count == 2);
  CHECK(lvt_tensor_rank(maps[0]) == 3);
  CHECK(lvt_tensor_extent(maps[0], 0) == 8);
  CHECK(lvt_tensor_extent(maps[0], 1) == 8);
  CHECK(lvt_tensor_extent(maps[1], 0) == 12);
  CHECK(lvt_tensor_extent(maps[1], 2) == 4);
  lvt_tensor_list_free(maps, count);

  TensorGuard logits;
  REQUIRE(lvt_model_forward_classify(g.m, input.t, &logits.t) == LVT_OK);
  CHECK(lvt_tensor_rank(logits.t) == 1);
  CHECK(lvt_tensor_numel(logits.t) == 10);
  REQUIRE(lvt_tensor_data(logits.t) != nullptr);

  // Undersized images surface as a shape error, not a crash.
  const int64_t small[3] = {3, 16, 16};
  TensorGuard tiny;
  REQUIRE(lvt_tensor_random(small, 3, 7, &tiny.t) == LVT_OK);
  lvt_tensor* out = nullptr;
  CHECK(lvt_model_forward_classify(g.m, tiny.t, &out) == LVT_ERROR_SHAPE);
}

TEST_CASE("weights round-trip bitwise through the C API") {
  ModelGuard a;
  REQUIRE(lvt_model_create(kToyConfig, 1, &a.m) == LVT_OK);
  const char* path = "/tmp/lvt_capi_weights.lvtw";
  REQUIRE(lvt_model_save_weights(a.m, path) == LVT_OK);

  ModelGuard b;
  REQUIRE(lvt_model_create(kToyConfig, 2, &b.m) == LVT_OK);  // different init
  REQUIRE(lvt_model_load_weights(b.m, path) == LVT_OK);

  const int64_t extents[3] = {3, 32, 32};
  TensorGuard input;
  REQUIRE(lvt_tensor_random(extents, 3, 5, &input.t) == LVT_OK);
  TensorGuard la, lb;
  REQUIRE(lvt_model_forward_classify(a.m, input.t, &la.t) == LVT_OK);
  REQUIRE(lvt_model_forward_classify(b.m, input.t, &lb.t) == LVT_OK);
  REQUIRE(lvt_tensor_numel(la.t) == lvt_tensor_numel(lb.t));
  CHECK(std::memcmp(lvt_tensor_data(la.t), lvt_tensor_data(lb.t),
                    sizeof(float) * static_cast<size_t>(lvt_tensor_numel(la.t))) == 0);

  // Corrupt magic -> format error; corrupt payload byte -> checksum error.
  std::ifstream in(path, std::ios::binary);
  std::string bytes((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  in.close();

  std::string bad = bytes;
  bad[0] = 'X';
  std::ofstream("/tmp/lvt_capi_magic.lvtw", std::ios::binary) << bad;
  CHECK(lvt_model_load_weights(b.m, "/tmp/lvt_capi_magic.lvtw") == LVT_ERROR_FORMAT);

  bad = bytes;
  bad[bad.size() - 5] = static_cast<char>(bad[bad.size() - 5] ^ 0x40);
  std::ofstream("/tmp/lvt_capi_crc.lvtw", std::ios::binary) << bad;
  CHECK(lvt_model_load_weights(b.m, "/tmp/lvt_capi_crc.lvtw") == LVT_ERROR_CHECKSUM);

  CHECK(lvt_model_load_weights(b.m, "/nonexistent/w.lvtw") == LVT_ERROR_IO);

  for (const char* p : {path, "/tmp/lvt_capi_magic.lvtw", "/tmp/lvt_capi_crc.lvtw"})
    std::remove(p);
}

TEST_CASE("tensor handles: creation, accessors, determinism, save") {
  const int64_t extents[2] = {4, 6};
  std::vector<float> data(24);
  for (size_t i = 0; i < data.size(); ++i) data[i] = static_cast<float>(i) * 0.5f;

  TensorGuard t;
  REQUIRE(lvt_tensor_create(extents, 2, data.data(), &t.t) == LVT_OK);
  CHECK(lvt_tensor_rank(t.t) == 2);
  CHECK(lvt_tensor_extent(t.t, 0) == 4);
  CHECK(lvt_tensor_extent(t.t, 1) == 6);
  CHECK(lvt_tensor_extent(t.t, 2) == 0);  // out of range reads as 0
  CHECK(lvt_tensor_numel(t.t) == 24);
  CHECK(lvt_tensor_data(t.t)[7] == 3.5f);

  // NULL data or tensor handles behave as documented.
  TensorGuard zeros;
  REQUIRE(lvt_tensor_create(extents, 2, nullptr, &zeros.t) == LVT_OK);
  CHECK(lvt_tensor_data(zeros.t)[0] == 0.0f);
  CHECK(lvt_tensor_rank(nullptr) == 0);
  CHECK(lvt_tensor_data(nullptr) == nullptr);

  const int64_t bad_extents[2] = {4, 0};
  lvt_tensor* out = nullptr;
  CHECK(lvt_tensor_create(bad_extents, 2, nullptr, &out) == LVT_ERROR_SHAPE);

  // Same seed, same bytes.
  TensorGuard r1, r2;
  REQUIRE(lvt_tensor_random(extents, 2, 99, &r1.t) == LVT_OK);
  REQUIRE(lvt_tensor_random(extents, 2, 99, &r2.t) == LVT_OK);
  CHECK(std::memcmp(lvt_tensor_data(r1.t), lvt_tensor_data(r2.t), sizeof(float) * 24) == 0);

  REQUIRE(lvt_tensor_save(t.t, "activation", "/tmp/lvt_capi_tensor.lvtw") == LVT_OK);
  std::ifstream saved("/tmp/lvt_capi_tensor.lvtw", std::ios::binary);
  char magic[4] = {};
  saved.read(magic, 4);
  CHECK(std::memcmp(magic, "LVTW", 4) == 0);
  saved.close();
  std::remove("/tmp/lvt_capi_tensor.lvtw");
}

TEST_CASE("invariant suite through the C API") {
  char* text = nullptr;
  REQUIRE(lvt_run_checks_json("tensor", 20260816, 0, &text) == LVT_OK);
  nlohmann::json report = nlohmann::json::parse(text);
  lvt_string_free(text);
  CHECK(report.at("all_pass").get<bool>());
  CHECK(report.at("checks").size() >= 5);

  CHECK(lvt_run_checks_json("bogus", 1, 0, &text) == LVT_ERROR_CONFIG);
}

TEST_CASE("thread control and the MAC counter") {
  CHECK(lvt_set_num_threads(0) == LVT_ERROR_INVALID_ARGUMENT);
  REQUIRE(lvt_set_num_threads(2) == LVT_OK);
  CHECK(lvt_num_threads() == 2);
  REQUIRE(lvt_set_num_threads(1) == LVT_OK);

  ModelGuard g;
  REQUIRE(lvt_model_create(kToyConfig, 3, &g.m) == LVT_OK);
  const int64_t extents[3] = {3, 32, 32};
  TensorGuard input;
  REQUIRE(lvt_tensor_random(extents, 3, 11, &input.t) == LVT_OK);

  lvt_mac_count_reset();
  CHECK(lvt_mac_count_read() == 0);
  TensorGuard logits;
  REQUIRE(lvt_model_forward_classify(g.m, input.t, &logits.t) == LVT_OK);
  const uint64_t counted = lvt_mac_count_read();
  CHECK(counted > 0);

  // The counter must agree with the analytic walk at this exact geometry.
  char* text = nullptr;
  REQUIRE(lvt_model_estimate_flops_json(g.m, 32, 32, &text) == LVT_OK);
  nlohmann::json flops = nlohmann::json::parse(text);
  lvt_string_free(text);
  CHECK(counted == flops.at("total_macs").get<std::uint64_t>());
  lvt_mac_count_reset();
}
