#include "model/config.hpp"

#include <fstream>
#include <sstream>

#include "json.hpp"

namespace lvt {

using nlohmann::json;

std::string to_string(SaType t) { return t == SaType::kCsa ? "CSA" : "RASA"; }

SaType sa_type_from_string(const std::string& s) {
  if (s == "CSA" || s == "csa") return SaType::kCsa;
  if (s == "RASA" || s == "rasa") return SaType::kRasa;
  throw ConfigError("unknown sa_type '" + s + "' (expected CSA or RASA)");
}

void StageSpec::validate(int stage_index) const {
  const std::string where = "stage " + std::to_string(stage_index + 1) + ": ";
  if (layer_num < 1) throw ConfigError(where + "layer_num must be >= 1");
  if (feature_dim < 1) throw ConfigError(where + "feature_dim must be >= 1");
  if (heads < 1 || feature_dim % heads != 0) {
    throw ConfigError(where + "feature_dim " + std::to_string(feature_dim) +
                      " not divisible by heads " + std::to_string(heads));
  }
  if (mlp_ratio < 1) throw ConfigError(where + "mlp_ratio must be >= 1");
  if (sr_ratio < 1) throw ConfigError(where + "sr_ratio must be >= 1");
  if (recursion_depth < 1) throw ConfigError(where + "recursion_depth must be >= 1");
}

void ModelConfig::validate() const {
  if (stages.empty() || stages.size() > 4) {
    throw ConfigError("config must declare between 1 and 4 stages, got " +
                      std::to_string(stages.size()));
  }
  if (input_channels < 1) throw ConfigError("input_channels must be >= 1");
  if (num_classes < 0) throw ConfigError("num_classes must be >= 0");
  if (image_size < 1) throw ConfigError("image_size must be >= 1");
  for (std::size_t i = 0; i < stages.size(); ++i) stages[i].validate(static_cast<int>(i));
}

ModelConfig ModelConfig::lvt_default() {
  ModelConfig cfg;
  cfg.stages = {
      {SaType::kCsa, 2, 64, 2, 4, 1, 2},
      {SaType::kRasa, 2, 64, 2, 8, 4, 2},
      {SaType::kRasa, 2, 160, 5, 4, 2, 2},
      {SaType::kRasa, 2, 256, 8, 4, 1, 2},
  };
  return cfg;
}

namespace {

int require_int(const json& j, const char* key, const std::string& where) {
  if (!j.contains(key)) throw ConfigError(where + ": missing key '" + key + "'");
  if (!j[key].is_number_integer()) throw ConfigError(where + ": key '" + key + "' must be an integer");
  return j[key].get<int>();
}

int optional_int(const json& j, const char* key, int fallback, const std::string& where) {
  if (!j.contains(key)) return fallback;
  if (!j[key].is_number_integer()) throw ConfigError(where + ": key '" + key + "' must be an integer");
  return j[key].get<int>();
}

}  // namespace

ModelConfig ModelConfig::from_json(const std::string& text) {
  json j;
  try {
    j = json::parse(text);
  } catch (const json::exception& e) {
    throw ConfigError(std::string("config is not valid JSON: ") + e.what());
  }
  if (!j.is_object()) throw ConfigError("config root must be a JSON object");
  if (!j.contains("stages") || !j["stages"].is_array()) {
    throw ConfigError("config needs a 'stages' array");
  }

  ModelConfig cfg;
  cfg.stages.clear();
  cfg.input_channels = optional_int(j, "input_channels", 3, "config");
  cfg.num_classes = optional_int(j, "num_classes", 1000, "config");
  cfg.image_size = optional_int(j, "image_size", 224, "config");
  const int default_depth = optional_int(j, "recursion_depth", 2, "config");

  int index = 0;
  for (const json& js : j["stages"]) {
    const std::string where = "stages[" + std::to_string(index) + "]";
    if (!js.is_object()) throw ConfigError(where + " must be an object");
    if (!js.contains("sa_type") || !js["sa_type"].is_string()) {
      throw ConfigError(where + ": missing string key 'sa_type'");
    }
    StageSpec s;
    s.sa_type = sa_type_from_string(js["sa_type"].get<std::string>());
    s.layer_num = require_int(js, "layer_num", where);
    s.feature_dim = require_int(js, "feature_dim", where);
    s.heads = require_int(js, "heads", where);
    s.mlp_ratio = require_int(js, "mlp_ratio", where);
    s.sr_ratio = optional_int(js, "sr_ratio", 1, where);
    s.recursion_depth = optional_int(js, "recursion_depth", default_depth, where);
    cfg.stages.push_back(s);
    ++index;
  }
  cfg.validate();
  return cfg;
}

ModelConfig ModelConfig::from_file(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open config file: " + path);
  std::ostringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string ModelConfig::to_json() const {
  json j;
  j["input_channels"] = input_channels;
  j["num_classes"] = num_classes;
  j["image_size"] = image_size;
  j["stages"] = json::array();
  for (const StageSpec& s : stages) {
    json js;
    js["sa_type"] = to_string(s.sa_type);
    js["layer_num"] = s.layer_num;
    js["feature_dim"] = s.feature_dim;
    js["heads"] = s.heads;
    js["mlp_ratio"] = s.mlp_ratio;
    if (s.sa_type == SaType::kRasa) {
      js["sr_ratio"] = s.sr_ratio;
      js["recursion_depth"] = s.recursion_depth;
    }
    j["stages"].push_back(js);
  }
  return j.dump(2);
}

}  // namespace lvt
