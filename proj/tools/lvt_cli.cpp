// Command-line driver for the lvt shared library. Five subcommands:
//   summary  - architecture table with per-stage parameter and MAC columns
//   forward  - run the backbone on an image (PNG/PPM) or a seeded random input
//   check    - run the runtime invariant suite; exit 0 iff every check passes
//   bench    - latency distribution and achieved MAC throughput
//   count    - parameter and MAC tables, encoder vs encoder+head split
// All model work goes through the C API in lvt/lvt.h.
#include "lvt/lvt.h"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <map>
#include <memory>
#include <numeric>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#ifdef LVT_CLI_HAVE_PNG
#include <png.h>
#endif

namespace {

using nlohmann::json;

// ---- C API conveniences ----------------------------------------------------

[[noreturn]] void die_api(const char* where, lvt_status status) {
  std::fflush(stdout);
  std::fprintf(stderr, "error: %s: %s (%s)\n", where, lvt_last_error(),
               lvt_status_name(status));
  std::exit(1);
}

void check_api(lvt_status status, const char* where) {
  if (status != LVT_OK) die_api(where, status);
}

[[noreturn]] void die(const std::string& message) {
  std::fflush(stdout);
  std::fprintf(stderr, "error: %s\n", message.c_str());
  std::exit(1);
}

struct ModelDeleter {
  void operator()(lvt_model* m) const { lvt_model_free(m); }
};
struct TensorDeleter {
  void operator()(lvt_tensor* t) const { lvt_tensor_free(t); }
};
using ModelPtr = std::unique_ptr<lvt_model, ModelDeleter>;
using TensorPtr = std::unique_ptr<lvt_tensor, TensorDeleter>;

// Fetches a JSON report through the C API and parses it.
template <typename Fn>
json fetch_json(Fn&& call, const char* where) {
  char* text = nullptr;
  check_api(call(&text), where);
  json parsed = json::parse(text);
  lvt_string_free(text);
  return parsed;
}

ModelPtr make_model(const std::string& config_path, uint64_t seed) {
  lvt_model* raw = nullptr;
  check_api(lvt_model_create_from_file(config_path.c_str(), seed, &raw),
            "loading configuration");
  return ModelPtr(raw);
}

std::string shape_string(const lvt_tensor* t) {
  std::string s = "[";
  for (size_t a = 0; a < lvt_tensor_rank(t); ++a) {
    if (a) s += ", ";
    s += std::to_string(lvt_tensor_extent(t, a));
  }
  return s + "]";
}

// ---- formatting -------------------------------------------------------------

std::string with_commas(std::int64_t value) {
  std::string digits = std::to_string(value);
  std::string out;
  int run = 0;
  for (auto it = digits.rbegin(); it != digits.rend(); ++it) {
    if (run == 3 && std::isdigit(static_cast<unsigned char>(*it))) {
      out += ',';
      run = 0;
    }
    out += *it;
    ++run;
  }
  std::reverse(out.begin(), out.end());
  return out;
}

std::string gmacs(std::uint64_t macs) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.4f", static_cast<double>(macs) / 1e9);
  return buf;
}

// ---- per-stage aggregation of report rows -----------------------------------

// Sums `rows[i][field]` into buckets keyed by path prefix: "stage<N>." rows
// go to bucket N-1, "head*" rows to the head bucket.
struct StageTotals {
  std::vector<std::int64_t> stages;
  std::int64_t head = 0;
};

StageTotals bucket_rows(const json& rows, const char* field, size_t stage_count) {
  StageTotals totals;
  totals.stages.assign(stage_count, 0);
  for (const json& row : rows) {
    const std::string path = row.at("path").get<std::string>();
    const std::int64_t value = row.at(field).get<std::int64_t>();
    if (path.rfind("head", 0) == 0) {
      totals.head += value;
    } else if (path.rfind("stage", 0) == 0) {
      const size_t idx = static_cast<size_t>(std::stoul(path.substr(5))) - 1;
      if (idx < stage_count) totals.stages[idx] += value;
    }
  }
  return totals;
}

// ---- image loading ----------------------------------------------------------

struct Image {
  std::int64_t channels = 0, height = 0, width = 0;
  std::vector<float> data;  // planar [C,H,W], scaled to [0,1]
};

// Binary PPM (P6, RGB) and PGM (P5, grayscale); grayscale is replicated to
// three channels so both feed the standard RGB stem.
Image load_pnm(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) die("cannot open image file: " + path);

  std::string magic;
  in >> magic;
  if (magic != "P6" && magic != "P5") die("unsupported PNM magic (want P6 or P5): " + path);

  auto next_int = [&in, &path]() {
    // Skips whitespace and '#' comment lines between header fields.
    for (;;) {
      int c = in.peek();
      if (c == '#') {
        std::string comment;
        std::getline(in, comment);
      } else if (std::isspace(c)) {
        in.get();
      } else {
        break;
      }
    }
    long v = -1;
    in >> v;
    if (!in || v <= 0) die("malformed PNM header: " + path);
    return v;
  };

  const long width = next_int();
  const long height = next_int();
  const long maxval = next_int();
  if (maxval <= 0 || maxval > 255) die("unsupported PNM maxval (want <= 255): " + path);
  in.get();  // single whitespace byte before the raster

  const int in_channels = magic == "P6" ? 3 : 1;
  std::vector<unsigned char> raster(static_cast<size_t>(width) * height * in_channels);
  in.read(reinterpret_cast<char*>(raster.data()), static_cast<std::streamsize>(raster.size()));
  if (in.gcount() != static_cast<std::streamsize>(raster.size()))
    die("truncated PNM raster: " + path);

  Image img;
  img.channels = 3;
  img.height = height;
  img.width = width;
  img.data.resize(static_cast<size_t>(3) * height * width);
  for (long y = 0; y < height; ++y) {
    for (long x = 0; x < width; ++x) {
      for (int c = 0; c < 3; ++c) {
        const size_t src = (static_cast<size_t>(y) * width + x) * in_channels +
                           (in_channels == 3 ? c : 0);
        img.data[(static_cast<size_t>(c) * height + y) * width + x] =
            static_cast<float>(raster[src]) / static_cast<float>(maxval);
      }
    }
  }
  return img;
}

#ifdef LVT_CLI_HAVE_PNG
Image load_png(const std::string& path) {
  png_image png;
  std::memset(&png, 0, sizeof png);
  png.version = PNG_IMAGE_VERSION;
  if (!png_image_begin_read_from_file(&png, path.c_str()))
    die(std::string("cannot read PNG: ") + png.message);
  png.format = PNG_FORMAT_RGB;
  std::vector<unsigned char> raster(PNG_IMAGE_SIZE(png));
  if (!png_image_finish_read(&png, nullptr, raster.data(), 0, nullptr))
    die(std::string("cannot decode PNG: ") + png.message);

  Image img;
  img.channels = 3;
  img.height = png.height;
  img.width = png.width;
  img.data.resize(static_cast<size_t>(3) * img.height * img.width);
  for (std::int64_t y = 0; y < img.height; ++y) {
    for (std::int64_t x = 0; x < img.width; ++x) {
      for (int c = 0; c < 3; ++c) {
        img.data[(static_cast<size_t>(c) * img.height + y) * img.width + x] =
            static_cast<float>(raster[(static_cast<size_t>(y) * img.width + x) * 3 + c]) /
            255.0f;
      }
    }
  }
  return img;
}
#endif

Image load_image(const std::string& path) {
  std::ifstream probe(path, std::ios::binary);
  if (!probe) die("cannot open image file: " + path);
  unsigned char sig[2] = {0, 0};
  probe.read(reinterpret_cast<char*>(sig), 2);
  probe.close();
  if (sig[0] == 0x89 && sig[1] == 'P') {
#ifdef LVT_CLI_HAVE_PNG
    return load_png(path);
#else
    die("this build has no PNG support; convert to PPM (P6) first");
#endif
  }
  return load_pnm(path);
}

// ---- subcommands ------------------------------------------------------------

int run_summary(const std::string& config_path) {
  ModelPtr model = make_model(config_path, 0);
  const json cfg = fetch_json(
      [&](char** out) { return lvt_model_config_json(model.get(), out); }, "reading config");
  const json params = fetch_json(
      [&](char** out) { return lvt_model_count_params_json(model.get(), out); },
      "counting parameters");
  const std::int64_t image_size = cfg.at("image_size").get<std::int64_t>();
  const json flops = fetch_json(
      [&](char** out) {
        return lvt_model_estimate_flops_json(model.get(), image_size, image_size, out);
      },
      "estimating flops");

  const json& stages = cfg.at("stages");
  const StageTotals p = bucket_rows(params.at("rows"), "params", stages.size());
  const StageTotals f = bucket_rows(flops.at("rows"), "macs", stages.size());

  std::printf("architecture @ %lldx%lld input (%zu stages)\n\n",
              static_cast<long long>(image_size), static_cast<long long>(image_size),
              stages.size());
  std::printf("%-6s %-9s %-5s %5s %7s %6s %5s %4s %6s %14s %10s\n", "stage", "output",
              "type", "dim", "layers", "heads", "mlp", "sr", "depth", "params", "GMACs");
  for (size_t si = 0; si < stages.size(); ++si) {
    const json& st = stages[si];
    const std::string type = st.at("sa_type").get<std::string>();
    const bool is_rasa = type == "RASA";
    const long long stride = 4ll << si;
    const std::string output = std::to_string(image_size / stride) + "x" +
                               std::to_string(image_size / stride);
    std::printf("%-6zu %-9s %-5s %5lld %7lld %6lld %5lld %4s %6s %14s %10s\n", si + 1,
                output.c_str(), type.c_str(), st.at("feature_dim").get<long long>(),
                st.at("layer_num").get<long long>(), st.at("heads").get<long long>(),
                st.at("mlp_ratio").get<long long>(),
                is_rasa ? std::to_string(st.at("sr_ratio").get<long long>()).c_str() : "-",
                is_rasa ? std::to_string(st.at("recursion_depth").get<long long>()).c_str()
                        : "-",
                with_commas(p.stages[si]).c_str(), gmacs(f.stages[si]).c_str());
  }
  const std::int64_t num_classes = cfg.at("num_classes").get<std::int64_t>();
  if (num_classes > 0) {
    std::printf("%-6s %-9s %-5s %5lld %7s %6s %5s %4s %6s %14s %10s\n", "head", "1x1",
                "gap", static_cast<long long>(num_classes), "-", "-", "-", "-", "-",
                with_commas(p.head).c_str(), gmacs(f.head).c_str());
  }
  std::printf("\nencoder: %s params, %s GMACs   encoder+head: %s params, %s GMACs\n",
              with_commas(params.at("encoder_total").get<std::int64_t>()).c_str(),
              gmacs(flops.at("encoder_macs").get<std::uint64_t>()).c_str(),
              with_commas(params.at("total").get<std::int64_t>()).c_str(),
              gmacs(flops.at("total_macs").get<std::uint64_t>()).c_str());
  return 0;
}

int run_count(const std::string& config_path) {
  ModelPtr model = make_model(config_path, 0);
  const json cfg = fetch_json(
      [&](char** out) { return lvt_model_config_json(model.get(), out); }, "reading config");
  const json params = fetch_json(
      [&](char** out) { return lvt_model_count_params_json(model.get(), out); },
      "counting parameters");
  const std::int64_t image_size = cfg.at("image_size").get<std::int64_t>();
  const json flops = fetch_json(
      [&](char** out) {
        return lvt_model_estimate_flops_json(model.get(), image_size, image_size, out);
      },
      "estimating flops");

  const size_t stage_count = cfg.at("stages").size();
  const StageTotals p = bucket_rows(params.at("rows"), "params", stage_count);

  std::printf("parameters\n");
  for (size_t si = 0; si < stage_count; ++si)
    std::printf("  stage%-14zu %14s\n", si + 1, with_commas(p.stages[si]).c_str());
  std::printf("  %-19s %14s  (%s weights + %s biases)\n", "encoder",
              with_commas(params.at("encoder_total").get<std::int64_t>()).c_str(),
              with_commas(params.at("encoder_weights").get<std::int64_t>()).c_str(),
              with_commas(params.at("encoder_biases").get<std::int64_t>()).c_str());
  std::printf("  %-19s %14s\n", "head",
              with_commas(params.at("head_params").get<std::int64_t>()).c_str());
  std::printf("  %-19s %14s\n", "encoder+head",
              with_commas(params.at("total").get<std::int64_t>()).c_str());

  std::printf("\nMACs per forward @ %lldx%lld (convention: %s)\n",
              static_cast<long long>(flops.at("height").get<std::int64_t>()),
              static_cast<long long>(flops.at("width").get<std::int64_t>()),
              flops.at("convention").get<std::string>().c_str());
  for (const json& row : flops.at("rows")) {
    std::printf("  %-19s %14s\n", row.at("path").get<std::string>().c_str(),
                with_commas(row.at("macs").get<std::int64_t>()).c_str());
  }
  std::printf("  %-19s %14s  (%s GMACs)\n", "encoder",
              with_commas(flops.at("encoder_macs").get<std::int64_t>()).c_str(),
              gmacs(flops.at("encoder_macs").get<std::uint64_t>()).c_str());
  std::printf("  %-19s %14s  (%s GMACs)\n", "encoder+head",
              with_commas(flops.at("total_macs").get<std::int64_t>()).c_str(),
              gmacs(flops.at("total_macs").get<std::uint64_t>()).c_str());
  return 0;
}

int run_forward(const std::string& config_path, const std::string& weights_path,
                const std::string& input_path, bool random_input, uint64_t seed,
                const std::string& dump_dir, const std::string& save_weights_path) {
  ModelPtr model = make_model(config_path, seed);
  if (!weights_path.empty())
    check_api(lvt_model_load_weights(model.get(), weights_path.c_str()), "loading weights");
  else
    std::printf("no --weights given; using seed-%llu initialized parameters\n",
                static_cast<unsigned long long>(seed));
  if (!save_weights_path.empty()) {
    check_api(lvt_model_save_weights(model.get(), save_weights_path.c_str()),
              "saving weights");
    std::printf("weights saved to %s\n", save_weights_path.c_str());
  }

  const json cfg = fetch_json(
      [&](char** out) { return lvt_model_config_json(model.get(), out); }, "reading config");

  TensorPtr input;
  if (!input_path.empty()) {
    Image img = load_image(input_path);
    if (img.channels != cfg.at("input_channels").get<std::int64_t>())
      die("image has " + std::to_string(img.channels) + " channels but the model expects " +
          cfg.at("input_channels").dump());
    const int64_t extents[3] = {img.channels, img.height, img.width};
    lvt_tensor* raw = nullptr;
    check_api(lvt_tensor_create(extents, 3, img.data.data(), &raw), "creating input tensor");
    input.reset(raw);
    std::printf("input %s: %s\n", input_path.c_str(), shape_string(input.get()).c_str());
  } else {
    (void)random_input;  // the default when --input is absent
    const std::int64_t side = cfg.at("image_size").get<std::int64_t>();
    const int64_t extents[3] = {cfg.at("input_channels").get<std::int64_t>(), side, side};
    lvt_tensor* raw = nullptr;
    check_api(lvt_tensor_random(extents, 3, seed, &raw), "creating random input");
    input.reset(raw);
    std::printf("input random(seed %llu): %s\n", static_cast<unsigned long long>(seed),
                shape_string(input.get()).c_str());
  }

  lvt_tensor** maps = nullptr;
  size_t map_count = 0;
  check_api(lvt_model_forward_features(model.get(), input.get(), &maps, &map_count),
            "running model");
  for (size_t i = 0; i < map_count; ++i)
    std::printf("stage%zu: %s\n", i + 1, shape_string(maps[i]).c_str());

  if (!dump_dir.empty()) {
    std::filesystem::create_directories(dump_dir);
    for (size_t i = 0; i < map_count; ++i) {
      const std::string name = "stage" + std::to_string(i + 1);
      const std::string path = dump_dir + "/" + name + ".lvtw";
      check_api(lvt_tensor_save(maps[i], name.c_str(), path.c_str()), "dumping activation");
    }
    std::printf("activations dumped to %s\n", dump_dir.c_str());
  }
  lvt_tensor_list_free(maps, map_count);

  if (cfg.at("num_classes").get<std::int64_t>() > 0) {
    lvt_tensor* raw_logits = nullptr;
    check_api(lvt_model_forward_classify(model.get(), input.get(), &raw_logits), "classify");
    TensorPtr logits(raw_logits);
    const std::int64_t n = lvt_tensor_numel(logits.get());
    const float* v = lvt_tensor_data(logits.get());
    std::printf("logits: %s\n", shape_string(logits.get()).c_str());
    if (n <= 20) {
      for (std::int64_t i = 0; i < n; ++i) std::printf("  class %lld: % .6f\n",
                                                       static_cast<long long>(i), v[i]);
    } else {
      std::vector<std::int64_t> order(static_cast<size_t>(n));
      std::iota(order.begin(), order.end(), 0);
      std::partial_sort(order.begin(), order.begin() + 5, order.end(),
                        [v](std::int64_t a, std::int64_t b) { return v[a] > v[b]; });
      std::printf("top-5:\n");
      for (int i = 0; i < 5; ++i)
        std::printf("  class %lld: % .6f\n", static_cast<long long>(order[i]), v[order[i]]);
    }
    if (!dump_dir.empty())
      check_api(lvt_tensor_save(logits.get(), "logits", (dump_dir + "/logits.lvtw").c_str()),
                "dumping logits");
  }
  return 0;
}

int run_check(const std::string& scope, uint64_t seed, bool f64, bool as_json) {
  char* text = nullptr;
  check_api(lvt_run_checks_json(scope.c_str(), seed, f64 ? 1 : 0, &text), "running checks");
  const json report = json::parse(text);
  if (as_json) {
    std::printf("%s\n", text);
    lvt_string_free(text);
    return report.at("all_pass").get<bool>() ? 0 : 1;
  }
  lvt_string_free(text);

  size_t passed = 0;
  for (const json& c : report.at("checks")) {
    const bool ok = c.at("pass").get<bool>();
    passed += ok ? 1 : 0;
    std::printf("%s  %-32s measured %-11.3e tol %-9.0e %6.3fs", ok ? "PASS" : "FAIL",
                c.at("name").get<std::string>().c_str(), c.at("measured").get<double>(),
                c.at("tolerance").get<double>(), c.at("elapsed_s").get<double>());
    const std::string note = c.at("note").get<std::string>();
    if (!note.empty()) std::printf("  (%s)", note.c_str());
    std::printf("\n");
  }
  const size_t total = report.at("checks").size();
  std::printf("%zu/%zu checks passed (scope %s, seed %llu, %s)\n", passed, total,
              scope.c_str(), static_cast<unsigned long long>(seed), f64 ? "f64" : "f32");
  return passed == total ? 0 : 1;
}

int run_bench(const std::string& config_path, const std::string& shape_text, int iters,
              int threads, uint64_t seed) {
  // --shape is BxCxHxW.
  std::vector<int64_t> extents;
  size_t pos = 0;
  while (pos <= shape_text.size()) {
    const size_t next = shape_text.find('x', pos);
    const std::string piece = shape_text.substr(pos, next - pos);
    try {
      extents.push_back(std::stoll(piece));
    } catch (const std::exception&) {
      die("bad --shape (want BxCxHxW): " + shape_text);
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  if (extents.size() != 4 ||
      !std::all_of(extents.begin(), extents.end(), [](int64_t e) { return e > 0; }))
    die("bad --shape (want BxCxHxW): " + shape_text);

  check_api(lvt_set_num_threads(threads), "setting threads");
  ModelPtr model = make_model(config_path, seed);
  const json cfg = fetch_json(
      [&](char** out) { return lvt_model_config_json(model.get(), out); }, "reading config");
  const bool has_head = cfg.at("num_classes").get<std::int64_t>() > 0;

  lvt_tensor* raw = nullptr;
  check_api(lvt_tensor_random(extents.data(), 4, seed, &raw), "creating input");
  TensorPtr input(raw);

  auto run_once = [&] {
    if (has_head) {
      lvt_tensor* out = nullptr;
      check_api(lvt_model_forward_classify(model.get(), input.get(), &out), "bench");
      lvt_tensor_free(out);
    } else {
      lvt_tensor** maps = nullptr;
      size_t count = 0;
      check_api(lvt_model_forward_features(model.get(), input.get(), &maps, &count),
                "bench");
      lvt_tensor_list_free(maps, count);
    }
  };

  run_once();  // warmup, not measured
  lvt_mac_count_reset();
  std::vector<double> latencies_ms(static_cast<size_t>(iters));
  const auto bench_start = std::chrono::steady_clock::now();
  for (int i = 0; i < iters; ++i) {
    const auto t0 = std::chrono::steady_clock::now();
    run_once();
    const auto t1 = std::chrono::steady_clock::now();
    latencies_ms[static_cast<size_t>(i)] =
        std::chrono::duration<double, std::milli>(t1 - t0).count();
  }
  const double total_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - bench_start).count();
  const std::uint64_t macs = lvt_mac_count_read();

  std::vector<double> sorted = latencies_ms;
  std::sort(sorted.begin(), sorted.end());
  auto quantile = [&sorted](double q) {
    const size_t idx = std::min(sorted.size() - 1,
                                static_cast<size_t>(std::llround(q * (sorted.size() - 1))));
    return sorted[idx];
  };
  const double mean =
      std::accumulate(latencies_ms.begin(), latencies_ms.end(), 0.0) / latencies_ms.size();

  std::printf("shape %s, %d iters, %d threads%s\n", shape_text.c_str(), iters, threads,
              has_head ? "" : " (features only: no head)");
  std::printf("latency  mean %.3f ms   p50 %.3f ms   p95 %.3f ms\n", mean, quantile(0.5),
              quantile(0.95));
  std::printf("throughput  %.3f GMAC/s  (%s GMACs per forward)\n",
              static_cast<double>(macs) / total_s / 1e9,
              gmacs(macs / static_cast<std::uint64_t>(iters)).c_str());
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{std::string("lvt ") + lvt_version() +
               " - lite vision transformer inference toolkit"};
  app.require_subcommand(1);

  std::string config_path, weights_path, input_path, dump_dir, save_weights_path;
  std::string scope = "all", shape_text;
  uint64_t seed = 0;
  int iters = 10, threads = 1;
  bool f64 = false, as_json = false, random_input = false;

  CLI::App* summary = app.add_subcommand("summary", "architecture table");
  summary->add_option("--config", config_path, "model configuration JSON")->required();

  CLI::App* forward = app.add_subcommand("forward", "run a forward pass");
  forward->add_option("--config", config_path, "model configuration JSON")->required();
  forward->add_option("--weights", weights_path,
                      "weight file (omit to use seeded initialization)");
  CLI::Option* input_opt =
      forward->add_option("--input", input_path, "input image, PNG or PPM/PGM");
  forward->add_flag("--random", random_input, "use a seeded random input (the default)")
      ->excludes(input_opt);
  forward->add_option("--seed", seed, "seed for the random input / initialization");
  forward->add_option("--dump-activations", dump_dir,
                      "write per-stage maps (weight-file tensor format) to this directory");
  forward->add_option("--save-weights", save_weights_path,
                      "also save the model's weights to this path");

  CLI::App* check = app.add_subcommand("check", "run the invariant suite");
  check->add_option("--scope", scope, "all|tensor|csa|rasa|backbone")
      ->check(CLI::IsMember({"all", "tensor", "csa", "rasa", "backbone"}));
  uint64_t check_seed = 1234;
  check->add_option("--seed", check_seed, "seed for randomized checks");
  check->add_flag("--f64", f64, "run precision-agnostic identities in double");
  check->add_flag("--json", as_json, "print the raw JSON report");

  CLI::App* bench = app.add_subcommand("bench", "measure latency and MAC throughput");
  bench->add_option("--config", config_path, "model configuration JSON")->required();
  bench->add_option("--shape", shape_text, "input shape BxCxHxW")->required();
  bench->add_option("--iters", iters, "measured iterations")->required()
      ->check(CLI::PositiveNumber);
  bench->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  bench->add_option("--seed", seed, "seed for weights and input");

  CLI::App* count = app.add_subcommand("count", "parameter and MAC tables");
  count->add_option("--config", config_path, "model configuration JSON")->required();

  CLI11_PARSE(app, argc, argv);

  if (summary->parsed()) return run_summary(config_path);
  if (forward->parsed())
    return run_forward(config_path, weights_path, input_path, random_input, seed, dump_dir,
                       save_weights_path);
  if (check->parsed()) return run_check(scope, check_seed, f64, as_json);
  if (bench->parsed()) return run_bench(config_path, shape_text, iters, threads, seed);
  if (count->parsed()) return run_count(config_path);
  return 1;
}
