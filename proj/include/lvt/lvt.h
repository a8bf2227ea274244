/* C interface to the lvt shared library.
 *
 * Everything lives behind two opaque handle types (lvt_model, lvt_tensor)
 * and plain status codes; no C++ types or exceptions cross this boundary.
 * Every fallible call returns an lvt_status and stores a human-readable
 * message retrievable with lvt_last_error() (per thread, overwritten by the
 * next failing call on the same thread).
 *
 * Ownership rules:
 *   - handles returned through an out-parameter belong to the caller and are
 *     released with the matching *_free function;
 *   - char* results are released with lvt_string_free();
 *   - tensor arrays from lvt_model_forward_features are released in one call
 *     with lvt_tensor_list_free();
 *   - const float* from lvt_tensor_data stays valid until the tensor is freed.
 */
#ifndef LVT_LVT_H
#define LVT_LVT_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define LVT_API __declspec(dllexport)
#else
#define LVT_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct lvt_model lvt_model;
typedef struct lvt_tensor lvt_tensor;

typedef enum lvt_status {
  LVT_OK = 0,
  LVT_ERROR_INVALID_ARGUMENT = 1, /* null handle or out-parameter at the boundary */
  LVT_ERROR_SHAPE = 2,            /* operand extents inconsistent with the op */
  LVT_ERROR_VALUE = 3,            /* numeric postcondition violated */
  LVT_ERROR_CONFIG = 4,           /* invalid model configuration */
  LVT_ERROR_IO = 5,               /* file open/read/write failure */
  LVT_ERROR_FORMAT = 6,           /* structurally invalid weight file */
  LVT_ERROR_CHECKSUM = 7,         /* weight payload failed its CRC */
  LVT_ERROR_INTERNAL = 8          /* unexpected exception behind the boundary */
} lvt_status;

/* Library version as "major.minor.patch". Static storage; do not free. */
LVT_API const char* lvt_version(void);

/* Stable name for a status code, e.g. "LVT_ERROR_SHAPE". Static storage. */
LVT_API const char* lvt_status_name(lvt_status status);

/* Message from this thread's most recent failing call ("" if none yet).
 * Valid until the next failing call on the same thread; do not free. */
LVT_API const char* lvt_last_error(void);

/* ---- model ------------------------------------------------------------- */

/* Builds a model from a JSON configuration string and reproducibly
 * initializes its parameters from `seed`. */
LVT_API lvt_status lvt_model_create(const char* config_json, uint64_t seed,
                                    lvt_model** out_model);

/* Same, reading the JSON configuration from a file. */
LVT_API lvt_status lvt_model_create_from_file(const char* config_path, uint64_t seed,
                                              lvt_model** out_model);

LVT_API void lvt_model_free(lvt_model* model);

/* Binds parameters from / serializes parameters to the versioned,
 * CRC-protected weight file format. */
LVT_API lvt_status lvt_model_load_weights(lvt_model* model, const char* path);
LVT_API lvt_status lvt_model_save_weights(const lvt_model* model, const char* path);

/* Runs the encoder on a [C,H,W] or [B,C,H,W] image tensor and returns one
 * feature map per stage. On success *out_maps is a caller-owned array of
 * *out_count tensors; release with lvt_tensor_list_free. */
LVT_API lvt_status lvt_model_forward_features(const lvt_model* model,
                                              const lvt_tensor* image,
                                              lvt_tensor*** out_maps,
                                              size_t* out_count);

/* Full forward including the pooled classification head; the result is
 * [num_classes] or [B,num_classes]. */
LVT_API lvt_status lvt_model_forward_classify(const lvt_model* model,
                                              const lvt_tensor* image,
                                              lvt_tensor** out_logits);

/* Parameter table (per-tensor rows plus encoder/head totals) as JSON. */
LVT_API lvt_status lvt_model_count_params_json(const lvt_model* model, char** out_json);

/* Analytic per-module MAC walk for one [C,height,width] forward, as JSON.
 * Convention: 1 MAC = 1 FLOP. */
LVT_API lvt_status lvt_model_estimate_flops_json(const lvt_model* model, int64_t height,
                                                 int64_t width, char** out_json);

/* The model's configuration, normalized, as JSON. */
LVT_API lvt_status lvt_model_config_json(const lvt_model* model, char** out_json);

/* ---- invariant checks --------------------------------------------------- */

/* Runs one scope of the runtime invariant suite ("tensor", "csa", "rasa",
 * "backbone" or "all") and returns the report as JSON. Individual check
 * failures are reported inside the JSON (`all_pass`), not as a status;
 * a non-OK status means the suite itself could not run. `use_f64` switches
 * the precision-agnostic tensor identities to double (gradient and oracle
 * checks always run in double). */
LVT_API lvt_status lvt_run_checks_json(const char* scope, uint64_t seed, int use_f64,
                                       char** out_json);

/* ---- tensors ------------------------------------------------------------ */

/* Creates an f32 tensor with the given extents. `data` supplies
 * rank-major (row-major) elements; pass NULL for zeros. */
LVT_API lvt_status lvt_tensor_create(const int64_t* extents, size_t rank,
                                     const float* data, lvt_tensor** out_tensor);

/* Creates an f32 tensor filled with uniform draws in [0, 1), seeded. */
LVT_API lvt_status lvt_tensor_random(const int64_t* extents, size_t rank, uint64_t seed,
                                     lvt_tensor** out_tensor);

LVT_API void lvt_tensor_free(lvt_tensor* tensor);

/* Shape accessors; each returns 0 on a null handle or out-of-range axis. */
LVT_API size_t lvt_tensor_rank(const lvt_tensor* tensor);
LVT_API int64_t lvt_tensor_extent(const lvt_tensor* tensor, size_t axis);
LVT_API int64_t lvt_tensor_numel(const lvt_tensor* tensor);

/* Read-only element pointer (row-major); NULL on a null handle. */
LVT_API const float* lvt_tensor_data(const lvt_tensor* tensor);

/* Writes the tensor under `name` as a one-entry file in the weight format
 * (used for activation dumps). */
LVT_API lvt_status lvt_tensor_save(const lvt_tensor* tensor, const char* name,
                                   const char* path);

/* Frees an array of tensors returned by lvt_model_forward_features,
 * including the array itself. Safe on NULL. */
LVT_API void lvt_tensor_list_free(lvt_tensor** tensors, size_t count);

/* ---- runtime ------------------------------------------------------------ */

/* Worker threads used by the compute kernels (results are bitwise identical
 * across thread counts). n < 1 is rejected. */
LVT_API lvt_status lvt_set_num_threads(int n);
LVT_API int lvt_num_threads(void);

/* Global multiply-accumulate counter maintained by the compute kernels;
 * read/reset it around a forward to measure achieved MACs. */
LVT_API uint64_t lvt_mac_count_read(void);
LVT_API void lvt_mac_count_reset(void);

/* Frees a char* produced by any *_json function. Safe on NULL. */
LVT_API void lvt_string_free(char* s);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* LVT_LVT_H */
