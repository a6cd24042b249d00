#ifndef GROKLAB_H
#define GROKLAB_H

/* Generated by cbindgen from groklab-ffi; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes for every fallible entry point.
typedef enum GroklabStatus {
  GROKLAB_STATUS_OK = 0,
  // A required pointer argument was NULL.
  GROKLAB_STATUS_NULL_ARGUMENT = 1,
  // A string argument was not valid UTF-8.
  GROKLAB_STATUS_INVALID_UTF8 = 2,
  // Arguments were structurally valid but semantically wrong.
  GROKLAB_STATUS_INVALID_ARGUMENT = 3,
  // Filesystem failure.
  GROKLAB_STATUS_IO = 4,
  // JSON, config, or checkpoint contents could not be parsed/validated.
  GROKLAB_STATUS_PARSE = 5,
  // A forward pass or training step produced non-finite values.
  GROKLAB_STATUS_NUMERIC = 6,
  // The training run aborted; the summary JSON carries the details.
  GROKLAB_STATUS_RUN_FAILED = 7,
  // A panic was caught at the FFI boundary.
  GROKLAB_STATUS_PANIC = 8,
} GroklabStatus;

// Opaque handle to a loaded checkpoint.
typedef struct GroklabModel GroklabModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string; never freed.
const char *groklab_version(void);

// Message for the most recent failure on this thread. The pointer stays
// valid until the next failing call on the same thread; do not free it.
const char *groklab_last_error_message(void);

// Frees a string returned through a `*mut *mut c_char` out-parameter.
//
// # Safety
// `s` must be NULL or a pointer previously returned by this library and not
// yet freed.
void groklab_string_free(char *s);

// Loads a checkpoint JSON file into an opaque model handle.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be valid for writes.
enum GroklabStatus groklab_model_load(const char *path, struct GroklabModel **out);

// Releases a model handle.
//
// # Safety
// `model` must be NULL or a pointer from [`groklab_model_load`] not yet freed.
void groklab_model_free(struct GroklabModel *model);

// Number of weight matrices; 0 if `model` is NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t groklab_model_num_layers(const struct GroklabModel *model);

// Modulus `P` of the task the model was trained on; 0 if NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t groklab_model_modulus(const struct GroklabModel *model);

// Epoch recorded in the checkpoint; 0 if NULL.
//
// # Safety
// `model` must be NULL or a live handle.
uint64_t groklab_model_epoch(const struct GroklabModel *model);

// Seed recorded in the checkpoint; 0 if NULL.
//
// # Safety
// `model` must be NULL or a live handle.
uint64_t groklab_model_seed(const struct GroklabModel *model);

// Classifies the pair `(i, j)`: writes the argmax class to `out_label`.
//
// # Safety
// `model` must be a live handle; `out_label` must be valid for writes.
enum GroklabStatus groklab_model_predict(const struct GroklabModel *model,
                                         uint64_t i,
                                         uint64_t j,
                                         uint64_t *out_label);

// Writes the `P` output logits for the pair `(i, j)` into `out`, which must
// have room for `len >= P` doubles.
//
// # Safety
// `model` must be a live handle; `out` must be valid for `len` writes.
enum GroklabStatus groklab_model_logits(const struct GroklabModel *model,
                                        uint64_t i,
                                        uint64_t j,
                                        double *out,
                                        size_t len);

// Shannon entropy (nats) of one layer's weight distribution.
//
// # Safety
// `model` must be a live handle; `out` must be valid for writes.
enum GroklabStatus groklab_model_layer_entropy(const struct GroklabModel *model,
                                               size_t layer,
                                               double *out);

// Exhaustively verifies the closed-form construction; on success writes the
// report as a JSON string to `out_json` (free with [`groklab_string_free`]).
//
// # Safety
// `out_json` must be valid for writes.
enum GroklabStatus groklab_verify_analytic(size_t p, size_t n, uint64_t seed, char **out_json);

// Trains one run from a JSON config string, writing artifacts under
// `out_dir`. The run summary JSON lands in `out_summary_json` (free with
// [`groklab_string_free`]); an aborted run reports
// [`GroklabStatus::RunFailed`] and still emits the summary.
//
// # Safety
// `config_json` and `out_dir` must be NUL-terminated strings;
// `out_summary_json` must be valid for writes.
enum GroklabStatus groklab_train(const char *config_json,
                                 const char *out_dir,
                                 char **out_summary_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GROKLAB_H */
