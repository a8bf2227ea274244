#include "model/model.hpp"

#include <algorithm>

#include "core/rng.hpp"
#include "json.hpp"

namespace lvt {

namespace {

constexpr int kPadMultiple = 32;

ConvSpec stem_spec() {
  ConvSpec s;
  s.kernel = 7;
  s.stride = 4;
  s.padding = 3;
  return s;
}

ConvSpec downsample_spec() {
  ConvSpec s;
  s.kernel = 3;
  s.stride = 2;
  s.padding = 1;
  return s;
}

index_t ceil_div(index_t a, index_t b) { return (a + b - 1) / b; }

/// One pre-norm residual block applied to a [d,h,w] map.
Tensor run_block(const Block& b, const Tensor& x) {
  const index_t d = x.extent(0), h = x.extent(1), w = x.extent(2);
  const Tensor normed1 =
      to_map(layer_norm(to_tokens(x), b.norm1_gamma, b.norm1_beta, kLayerNormEps), d, h, w);
  const Tensor attended = b.kind == SaType::kCsa ? csa_forward(normed1, b.csa)
                                                 : rasa_forward(normed1, b.rasa, b.rasa_cfg);
  const Tensor mid = add(x, attended);
  const Tensor normed2 =
      to_map(layer_norm(to_tokens(mid), b.norm2_gamma, b.norm2_beta, kLayerNormEps), d, h, w);
  return add(mid, mix_ffn(normed2, b.ffn));
}

bool bias_like(const std::string& name) {
  const auto leaf_pos = name.rfind('.');
  const std::string leaf = leaf_pos == std::string::npos ? name : name.substr(leaf_pos + 1);
  if (leaf == "beta") return true;
  if (leaf == "b") return true;
  if (leaf.size() > 2 && leaf.compare(leaf.size() - 2, 2, "_b") == 0) return true;
  if (leaf.size() > 2 && leaf.compare(0, 2, "b_") == 0) return true;
  return false;
}

}  // namespace

Model build_model(const ModelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  Model m;
  m.cfg_ = cfg;

  int in_dim = cfg.input_channels;
  for (std::size_t si = 0; si < cfg.stages.size(); ++si) {
    const StageSpec& spec = cfg.stages[si];
    Stage stage;
    stage.spec = spec;

    stage.embed.in_dim = in_dim;
    stage.embed.out_dim = spec.feature_dim;
    stage.embed.spec = si == 0 ? stem_spec() : downsample_spec();

    const int d = spec.feature_dim;
    for (int bi = 0; bi < spec.layer_num; ++bi) {
      Block b;
      b.kind = spec.sa_type;
      if (spec.sa_type == SaType::kCsa) {
        b.csa.dim = d;
        b.csa.heads = spec.heads;
      } else {
        b.rasa.dim = d;
        b.rasa.attn.dim = d;
        b.rasa.attn.heads = spec.heads;
        b.rasa.sr.dim = d;
        b.rasa.sr.ratio = spec.sr_ratio;
        b.rasa_cfg.depth = spec.recursion_depth;
      }
      b.ffn.dim = d;
      b.ffn.hidden = d * spec.mlp_ratio;
      stage.blocks.push_back(std::move(b));
    }
    m.stages_.push_back(std::move(stage));
    in_dim = spec.feature_dim;
  }

  // Allocate and initialize every parameter in registration order.
  Rng rng(seed);
  m.for_each_param([&](const std::string& name, Tensor& t) {
    const auto leaf_pos = name.rfind('.');
    const std::string leaf = leaf_pos == std::string::npos ? name : name.substr(leaf_pos + 1);
    if (leaf == "gamma") {
      std::fill(t.vec().begin(), t.vec().end(), 1.0f);
    } else if (bias_like(name)) {
      std::fill(t.vec().begin(), t.vec().end(), 0.0f);
    } else {
      for (index_t i = 0; i < t.numel(); ++i) t[i] = static_cast<float>(rng.trunc_normal(0.02));
    }
  });
  return m;
}

void Model::for_each_param(const std::function<void(const std::string&, Tensor&)>& fn) {
  for (std::size_t si = 0; si < stages_.size(); ++si) {
    Stage& st = stages_[si];
    const std::string sp = "stage" + std::to_string(si + 1) + ".";
    const StageSpec& spec = st.spec;
    const index_t d = spec.feature_dim;
    const index_t in = si == 0 ? cfg_.input_channels : cfg_.stages[si - 1].feature_dim;
    const index_t k = st.embed.spec.kernel;

    auto ensure = [&](Tensor& t, std::vector<index_t> shape) -> Tensor& {
      if (t.empty()) t = Tensor(std::move(shape));
      return t;
    };

    fn(sp + "embed.proj_w", ensure(st.embed.proj_w, {d, in, k, k}));
    fn(sp + "embed.proj_b", ensure(st.embed.proj_b, {d}));
    fn(sp + "embed.gamma", ensure(st.embed.gamma, {d}));
    fn(sp + "embed.beta", ensure(st.embed.beta, {d}));

    for (std::size_t bi = 0; bi < st.blocks.size(); ++bi) {
      Block& b = st.blocks[bi];
      const std::string bp = sp + "block" + std::to_string(bi + 1) + ".";
      fn(bp + "norm1.gamma", ensure(b.norm1_gamma, {d}));
      fn(bp + "norm1.beta", ensure(b.norm1_beta, {d}));
      if (b.kind == SaType::kCsa) {
        const index_t k2 = index_t(b.csa.kernel) * b.csa.kernel;
        const index_t dh = b.csa.head_dim();
        fn(bp + "csa.w_filter", ensure(b.csa.w_filter, {k2, spec.heads, dh, dh}));
        fn(bp + "csa.w_qk", ensure(b.csa.w_qk, {spec.heads * k2 * k2, d}));
        fn(bp + "csa.w_out", ensure(b.csa.w_out, {d, d}));
      } else {
        fn(bp + "rasa.w_q1", ensure(b.rasa.w_q1, {d, d}));
        fn(bp + "rasa.b_q1", ensure(b.rasa.b_q1, {d}));
        fn(bp + "rasa.w_qd", ensure(b.rasa.w_qd, {d, 1, 3, 3}));
        fn(bp + "rasa.b_qd", ensure(b.rasa.b_qd, {d}));
        fn(bp + "rasa.w_k", ensure(b.rasa.w_k, {d, d}));
        fn(bp + "rasa.b_k", ensure(b.rasa.b_k, {d}));
        fn(bp + "rasa.w_v", ensure(b.rasa.w_v, {d, d}));
        fn(bp + "rasa.b_v", ensure(b.rasa.b_v, {d}));
        fn(bp + "rasa.w_out", ensure(b.rasa.w_out, {d, d}));
        fn(bp + "rasa.b_out", ensure(b.rasa.b_out, {d}));
        if (b.rasa.sr.ratio > 1) {
          const index_t r = b.rasa.sr.ratio;
          fn(bp + "rasa.sr.proj_w", ensure(b.rasa.sr.proj_w, {d, d, r, r}));
          fn(bp + "rasa.sr.proj_b", ensure(b.rasa.sr.proj_b, {d}));
          fn(bp + "rasa.sr.gamma", ensure(b.rasa.sr.gamma, {d}));
          fn(bp + "rasa.sr.beta", ensure(b.rasa.sr.beta, {d}));
        }
      }
      fn(bp + "norm2.gamma", ensure(b.norm2_gamma, {d}));
      fn(bp + "norm2.beta", ensure(b.norm2_beta, {d}));
      const index_t hidden = b.ffn.hidden;
      fn(bp + "ffn.fc1_w", ensure(b.ffn.fc1_w, {hidden, d}));
      fn(bp + "ffn.fc1_b", ensure(b.ffn.fc1_b, {hidden}));
      fn(bp + "ffn.dw_w", ensure(b.ffn.dw_w, {hidden, 1, 3, 3}));
      fn(bp + "ffn.dw_b", ensure(b.ffn.dw_b, {hidden}));
      fn(bp + "ffn.fc2_w", ensure(b.ffn.fc2_w, {d, hidden}));
      fn(bp + "ffn.fc2_b", ensure(b.ffn.fc2_b, {d}));
    }
  }
  if (has_head()) {
    const index_t last = cfg_.stages.back().feature_dim;
    if (head_w.empty()) head_w = Tensor({index_t(cfg_.num_classes), last});
    if (head_b.empty()) head_b = Tensor({index_t(cfg_.num_classes)});
    fn("head.w", head_w);
    fn("head.b", head_b);
  }
}

void Model::for_each_param(
    const std::function<void(const std::string&, const Tensor&)>& fn) const {
  const_cast<Model*>(this)->for_each_param(
      [&](const std::string& name, Tensor& t) { fn(name, t); });
}

std::vector<Tensor> Model::forward_features(const Tensor& image) const {
  if (image.rank() == 4) {
    // Batch: run each image and stack per-stage maps.
    const index_t bsz = image.extent(0);
    const index_t c = image.extent(1), h = image.extent(2), w = image.extent(3);
    std::vector<Tensor> stacked;
    for (index_t b = 0; b < bsz; ++b) {
      Tensor one({c, h, w});
      std::copy_n(image.data() + b * c * h * w, c * h * w, one.data());
      std::vector<Tensor> maps = forward_features(one);
      if (b == 0) {
        for (const Tensor& m : maps) {
          std::vector<index_t> shape = m.shape();
          shape.insert(shape.begin(), bsz);
          stacked.emplace_back(shape);
        }
      }
      for (std::size_t s = 0; s < maps.size(); ++s) {
        std::copy_n(maps[s].data(), maps[s].numel(), stacked[s].data() + b * maps[s].numel());
      }
    }
    return stacked;
  }

  if (image.rank() != 3 || image.extent(0) != cfg_.input_channels) {
    throw ShapeError("forward: expected [" + std::to_string(cfg_.input_channels) +
                     ",H,W] or a batch of such, got " + image.shape_str());
  }
  const index_t h = image.extent(1), w = image.extent(2);
  if (h < kPadMultiple || w < kPadMultiple) {
    throw ShapeError("forward: input must be at least 32x32, got " + image.shape_str());
  }

  Tensor x = pad_to_multiple(image, kPadMultiple);
  std::vector<Tensor> features;
  for (std::size_t si = 0; si < stages_.size(); ++si) {
    const Stage& st = stages_[si];
    x = patch_embed(x, st.embed);
    for (const Block& b : st.blocks) x = run_block(b, x);
    const index_t stride = ModelConfig::stage_stride(static_cast<int>(si));
    features.push_back(crop_map(x, ceil_div(h, stride), ceil_div(w, stride)));
  }
  return features;
}

Tensor Model::forward_classify(const Tensor& image) const {
  if (!has_head()) throw ValueError("forward_classify: model has no classification head");
  if (image.rank() == 4) {
    const index_t bsz = image.extent(0);
    Tensor out({bsz, index_t(cfg_.num_classes)});
    const index_t chw = image.numel() / bsz;
    for (index_t b = 0; b < bsz; ++b) {
      Tensor one({image.extent(1), image.extent(2), image.extent(3)});
      std::copy_n(image.data() + b * chw, chw, one.data());
      const Tensor logits = forward_classify(one);
      std::copy_n(logits.data(), logits.numel(), out.data() + b * cfg_.num_classes);
    }
    return out;
  }

  const Tensor last = forward_features(image).back();
  const index_t d = last.extent(0), hw = last.extent(1) * last.extent(2);
  Tensor pooled({1, d});
  for (index_t c = 0; c < d; ++c) {
    float acc = 0;
    for (index_t i = 0; i < hw; ++i) acc += last[c * hw + i];
    pooled(0, c) = acc / static_cast<float>(hw);
  }
  Tensor logits = linear(pooled, head_w, &head_b);
  return Tensor({index_t(cfg_.num_classes)}, std::move(logits.vec()));
}

CountReport Model::count_params() const {
  CountReport report;
  for_each_param([&](const std::string& name, const Tensor& t) {
    const bool head = name.compare(0, 5, "head.") == 0;
    const bool bias = bias_like(name);
    report.rows.push_back({name, t.numel(), bias});
    if (head) {
      report.head_params += t.numel();
    } else if (bias) {
      report.encoder_biases += t.numel();
    } else {
      report.encoder_weights += t.numel();
    }
  });
  return report;
}

FlopsReport Model::estimate_flops(index_t height, index_t width) const {
  if (height < kPadMultiple || width < kPadMultiple) {
    throw ShapeError("estimate_flops: input must be at least 32x32");
  }
  FlopsReport report;
  report.height = ceil_div(height, kPadMultiple) * kPadMultiple;
  report.width = ceil_div(width, kPadMultiple) * kPadMultiple;

  index_t h = report.height, w = report.width;
  index_t in_dim = cfg_.input_channels;
  for (std::size_t si = 0; si < stages_.size(); ++si) {
    const Stage& st = stages_[si];
    const std::string sp = "stage" + std::to_string(si + 1) + ".";
    const index_t d = st.spec.feature_dim;
    const ConvSpec& es = st.embed.spec;
    const index_t oh = es.out_extent(h), ow = es.out_extent(w);

    const std::uint64_t embed_macs =
        std::uint64_t(es.kernel) * es.kernel * in_dim * d * oh * ow;
    report.rows.push_back({sp + "embed", embed_macs});
    report.encoder_macs += embed_macs;

    const index_t n = oh * ow;
    for (std::size_t bi = 0; bi < st.blocks.size(); ++bi) {
      const Block& b = st.blocks[bi];
      const std::string bp = sp + "block" + std::to_string(bi + 1) + ".";
      std::uint64_t sa_macs = 0;
      if (b.kind == SaType::kCsa) {
        ConvSpec ws;
        ws.kernel = b.csa.kernel;
        ws.stride = b.csa.stride;
        ws.padding = b.csa.padding();
        const index_t L = ws.out_extent(oh) * ws.out_extent(ow);
        const std::uint64_t k2 = std::uint64_t(b.csa.kernel) * b.csa.kernel;
        const std::uint64_t dh = b.csa.head_dim();
        sa_macs = std::uint64_t(L) * (k2 * d * dh          // per-position projections
                                      + d * b.csa.heads * k2 * k2  // alpha prediction
                                      + k2 * k2 * d)       // weighted summation
                  + std::uint64_t(n) * d * d;              // output projection
        report.rows.push_back({bp + "csa", sa_macs});
      } else {
        const index_t r = b.rasa.sr.ratio;
        const index_t m = ceil_div(oh, r) * ceil_div(ow, r);
        std::uint64_t per_step = std::uint64_t(n) * d * d;            // query 1x1
        per_step += std::uint64_t(b.rasa.dilation_rates.size()) * 9 * d * n;  // dilated branches
        if (r > 1) per_step += std::uint64_t(d) * d * r * r * m;      // reduction conv
        per_step += 2ull * m * d * d;                                 // key/value projections
        per_step += 2ull * n * m * d;                                 // attention products
        per_step += std::uint64_t(n) * d * d;                         // output projection
        sa_macs = per_step * std::uint64_t(b.rasa_cfg.depth);
        report.rows.push_back({bp + "rasa", sa_macs});
      }
      report.encoder_macs += sa_macs;

      const std::uint64_t hidden = b.ffn.hidden;
      const std::uint64_t ffn_macs =
          std::uint64_t(n) * d * hidden * 2 + 9ull * n * hidden;
      report.rows.push_back({bp + "ffn", ffn_macs});
      report.encoder_macs += ffn_macs;
    }
    h = oh;
    w = ow;
    in_dim = d;
  }
  if (has_head()) {
    report.head_macs = std::uint64_t(cfg_.stages.back().feature_dim) * cfg_.num_classes;
    report.rows.push_back({"head", report.head_macs});
  }
  return report;
}

WeightStore Model::to_store() const {
  WeightStore store;
  for_each_param([&](const std::string& name, const Tensor& t) { store.put(name, t); });
  return store;
}

void Model::bind_from_store(const WeightStore& store) {
  std::size_t bound = 0;
  for_each_param([&](const std::string& name, Tensor& t) {
    const Tensor& src = store.get(name);
    if (!src.same_shape(t)) {
      throw ShapeError("weight '" + name + "' has shape " + src.shape_str() +
                       " but the config needs " + t.shape_str());
    }
    t = src;
    ++bound;
  });
  if (bound != store.size()) {
    throw FormatError("weight store holds " + std::to_string(store.size()) +
                      " tensors but the model binds " + std::to_string(bound));
  }
}

void Model::save_weights(const std::string& path) const { to_store().save(path); }

void Model::load_weights(const std::string& path) { bind_from_store(WeightStore::load(path)); }

std::string CountReport::to_json() const {
  nlohmann::json j;
  j["rows"] = nlohmann::json::array();
  for (const Row& r : rows) {
    j["rows"].push_back({{"path", r.path}, {"params", r.params}, {"is_bias", r.is_bias}});
  }
  j["encoder_weights"] = encoder_weights;
  j["encoder_biases"] = encoder_biases;
  j["encoder_total"] = encoder_total();
  j["head_params"] = head_params;
  j["total"] = total();
  return j.dump(2);
}

std::string FlopsReport::to_json() const {
  nlohmann::json j;
  j["convention"] = "1 MAC = 1 FLOP";
  j["height"] = height;
  j["width"] = width;
  j["rows"] = nlohmann::json::array();
  for (const Row& r : rows) j["rows"].push_back({{"path", r.path}, {"macs", r.macs}});
  j["encoder_macs"] = encoder_macs;
  j["head_macs"] = head_macs;
  j["total_macs"] = total();
  return j.dump(2);
}

}  // namespace lvt
