// C boundary of the shared library. Translates between the exception-based
// C++ core and status codes + a per-thread error message; owns the handle
// and string allocation conventions documented in lvt.h.
#include "lvt/lvt.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <new>
#include <string>
#include <utility>
#include <vector>

#include "core/error.hpp"
#include "core/parallel.hpp"
#include "core/profile.hpp"
#include "core/rng.hpp"
#include "core/tensor.hpp"
#include "model/model.hpp"
#include "model/weight_store.hpp"
#include "verify/suite.hpp"

struct lvt_model {
  lvt::Model impl;
};

struct lvt_tensor {
  lvt::Tensor impl;
};

namespace {

thread_local std::string g_last_error;

lvt_status fail(lvt_status status, const std::string& message) {
  g_last_error = message;
  return status;
}

// Runs `body` and maps each exception type to its status code. `body`
// performs all work including writing out-parameters, so a non-OK return
// leaves the caller's outputs untouched.
template <typename Fn>
lvt_status guarded(Fn&& body) {
  try {
    body();
    return LVT_OK;
  } catch (const lvt::ShapeError& e) {
    return fail(LVT_ERROR_SHAPE, e.what());
  } catch (const lvt::ValueError& e) {
    return fail(LVT_ERROR_VALUE, e.what());
  } catch (const lvt::ConfigError& e) {
    return fail(LVT_ERROR_CONFIG, e.what());
  } catch (const lvt::FormatError& e) {
    return fail(LVT_ERROR_FORMAT, e.what());
  } catch (const lvt::ChecksumError& e) {
    return fail(LVT_ERROR_CHECKSUM, e.what());
  } catch (const lvt::IoError& e) {
    return fail(LVT_ERROR_IO, e.what());
  } catch (const std::bad_alloc&) {
    return fail(LVT_ERROR_INTERNAL, "out of memory");
  } catch (const std::exception& e) {
    return fail(LVT_ERROR_INTERNAL, e.what());
  } catch (...) {
    return fail(LVT_ERROR_INTERNAL, "unknown exception");
  }
}

lvt_status require(bool ok, const char* what) {
  return ok ? LVT_OK : fail(LVT_ERROR_INVALID_ARGUMENT, what);
}

// Copies a std::string into a malloc'd buffer for lvt_string_free.
char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

std::vector<lvt::index_t> copy_extents(const int64_t* extents, size_t rank) {
  if (rank == 0) throw lvt::ShapeError("tensor rank must be at least 1");
  std::vector<lvt::index_t> shape(rank);
  for (size_t i = 0; i < rank; ++i) {
    if (extents[i] < 1) throw lvt::ShapeError("tensor extents must be positive");
    shape[i] = static_cast<lvt::index_t>(extents[i]);
  }
  return shape;
}

}  // namespace

extern "C" {

const char* lvt_version(void) { return "1.0.0"; }

const char* lvt_status_name(lvt_status status) {
  switch (status) {
    case LVT_OK: return "LVT_OK";
    case LVT_ERROR_INVALID_ARGUMENT: return "LVT_ERROR_INVALID_ARGUMENT";
    case LVT_ERROR_SHAPE: return "LVT_ERROR_SHAPE";
    case LVT_ERROR_VALUE: return "LVT_ERROR_VALUE";
    case LVT_ERROR_CONFIG: return "LVT_ERROR_CONFIG";
    case LVT_ERROR_IO: return "LVT_ERROR_IO";
    case LVT_ERROR_FORMAT: return "LVT_ERROR_FORMAT";
    case LVT_ERROR_CHECKSUM: return "LVT_ERROR_CHECKSUM";
    case LVT_ERROR_INTERNAL: return "LVT_ERROR_INTERNAL";
  }
  return "LVT_ERROR_UNKNOWN";
}

const char* lvt_last_error(void) { return g_last_error.c_str(); }

/* ---- model ------------------------------------------------------------- */

lvt_status lvt_model_create(const char* config_json, uint64_t seed, lvt_model** out_model) {
  if (lvt_status s = require(config_json && out_model, "lvt_model_create: null argument"))
    return s;
  return guarded([&] {
    lvt::ModelConfig cfg = lvt::ModelConfig::from_json(config_json);
    *out_model = new lvt_model{lvt::build_model(cfg, seed)};
  });
}

lvt_status lvt_model_create_from_file(const char* config_path, uint64_t seed,
                                      lvt_model** out_model) {
  if (lvt_status s =
          require(config_path && out_model, "lvt_model_create_from_file: null argument"))
    return s;
  return guarded([&] {
    lvt::ModelConfig cfg = lvt::ModelConfig::from_file(config_path);
    *out_model = new lvt_model{lvt::build_model(cfg, seed)};
  });
}

void lvt_model_free(lvt_model* model) { delete model; }

lvt_status lvt_model_load_weights(lvt_model* model, const char* path) {
  if (lvt_status s = require(model && path, "lvt_model_load_weights: null argument"))
    return s;
  return guarded([&] { model->impl.load_weights(path); });
}

lvt_status lvt_model_save_weights(const lvt_model* model, const char* path) {
  if (lvt_status s = require(model && path, "lvt_model_save_weights: null argument"))
    return s;
  return guarded([&] { model->impl.save_weights(path); });
}

lvt_status lvt_model_forward_features(const lvt_model* model, const lvt_tensor* image,
                                      lvt_tensor*** out_maps, size_t* out_count) {
  if (lvt_status s = require(model && image && out_maps && out_count,
                             "lvt_model_forward_features: null argument"))
    return s;
  return guarded([&] {
    std::vector<lvt::Tensor> maps = model->impl.forward_features(image->impl);
    lvt_tensor** list = new lvt_tensor*[maps.size()]();
    size_t filled = 0;
    try {
      for (; filled < maps.size(); ++filled)
        list[filled] = new lvt_tensor{std::move(maps[filled])};
    } catch (...) {
      lvt_tensor_list_free(list, filled);
      throw;
    }
    *out_maps = list;
    *out_count = maps.size();
  });
}

lvt_status lvt_model_forward_classify(const lvt_model* model, const lvt_tensor* image,
                                      lvt_tensor** out_logits) {
  if (lvt_status s = require(model && image && out_logits,
                             "lvt_model_forward_classify: null argument"))
    return s;
  return guarded(
      [&] { *out_logits = new lvt_tensor{model->impl.forward_classify(image->impl)}; });
}

lvt_status lvt_model_count_params_json(const lvt_model* model, char** out_json) {
  if (lvt_status s = require(model && out_json, "lvt_model_count_params_json: null argument"))
    return s;
  return guarded([&] { *out_json = copy_string(model->impl.count_params().to_json()); });
}

lvt_status lvt_model_estimate_flops_json(const lvt_model* model, int64_t height,
                                         int64_t width, char** out_json) {
  if (lvt_status s =
          require(model && out_json, "lvt_model_estimate_flops_json: null argument"))
    return s;
  return guarded([&] {
    if (height < 1 || width < 1) throw lvt::ShapeError("image extents must be positive");
    *out_json = copy_string(
        model->impl
            .estimate_flops(static_cast<lvt::index_t>(height), static_cast<lvt::index_t>(width))
            .to_json());
  });
}

lvt_status lvt_model_config_json(const lvt_model* model, char** out_json) {
  if (lvt_status s = require(model && out_json, "lvt_model_config_json: null argument"))
    return s;
  return guarded([&] { *out_json = copy_string(model->impl.config().to_json()); });
}

/* ---- invariant checks --------------------------------------------------- */

lvt_status lvt_run_checks_json(const char* scope, uint64_t seed, int use_f64,
                               char** out_json) {
  if (lvt_status s = require(scope && out_json, "lvt_run_checks_json: null argument"))
    return s;
  return guarded([&] {
    lvt::CheckReport report = lvt::run_invariant_suite(scope, seed, use_f64 != 0);
    *out_json = copy_string(report.to_json());
  });
}

/* ---- tensors ------------------------------------------------------------ */

lvt_status lvt_tensor_create(const int64_t* extents, size_t rank, const float* data,
                             lvt_tensor** out_tensor) {
  if (lvt_status s = require(extents && out_tensor, "lvt_tensor_create: null argument"))
    return s;
  return guarded([&] {
    lvt::Tensor t(copy_extents(extents, rank));
    if (data != nullptr)
      std::memcpy(t.data(), data, static_cast<size_t>(t.numel()) * sizeof(float));
    *out_tensor = new lvt_tensor{std::move(t)};
  });
}

lvt_status lvt_tensor_random(const int64_t* extents, size_t rank, uint64_t seed,
                             lvt_tensor** out_tensor) {
  if (lvt_status s = require(extents && out_tensor, "lvt_tensor_random: null argument"))
    return s;
  return guarded([&] {
    lvt::Rng rng(seed);
    *out_tensor =
        new lvt_tensor{rng.uniform_tensor<float>(copy_extents(extents, rank), 0.0, 1.0)};
  });
}

void lvt_tensor_free(lvt_tensor* tensor) { delete tensor; }

size_t lvt_tensor_rank(const lvt_tensor* tensor) {
  return tensor == nullptr ? 0 : tensor->impl.rank();
}

int64_t lvt_tensor_extent(const lvt_tensor* tensor, size_t axis) {
  if (tensor == nullptr || axis >= tensor->impl.rank()) return 0;
  return tensor->impl.extent(axis);
}

int64_t lvt_tensor_numel(const lvt_tensor* tensor) {
  return tensor == nullptr ? 0 : tensor->impl.numel();
}

const float* lvt_tensor_data(const lvt_tensor* tensor) {
  return tensor == nullptr ? nullptr : tensor->impl.data();
}

lvt_status lvt_tensor_save(const lvt_tensor* tensor, const char* name, const char* path) {
  if (lvt_status s = require(tensor && name && path, "lvt_tensor_save: null argument"))
    return s;
  return guarded([&] { lvt::save_tensor_file(tensor->impl, name, path); });
}

void lvt_tensor_list_free(lvt_tensor** tensors, size_t count) {
  if (tensors == nullptr) return;
  for (size_t i = 0; i < count; ++i) delete tensors[i];
  delete[] tensors;
}

/* ---- runtime ------------------------------------------------------------ */

lvt_status lvt_set_num_threads(int n) {
  if (lvt_status s = require(n >= 1, "lvt_set_num_threads: thread count must be >= 1"))
    return s;
  lvt::set_num_threads(n);
  return LVT_OK;
}

int lvt_num_threads(void) { return lvt::num_threads(); }

uint64_t lvt_mac_count_read(void) { return lvt::mac_count_read(); }

void lvt_mac_count_reset(void) { lvt::mac_count_reset(); }

void lvt_string_free(char* s) { std::free(s); }

}  // extern "C"
