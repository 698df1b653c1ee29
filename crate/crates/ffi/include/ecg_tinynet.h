#ifndef ECG_TINYNET_H
#define ECG_TINYNET_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result codes shared by all functions.
typedef enum EcgtnStatus {
  ECGTN_STATUS_OK = 0,
  ECGTN_STATUS_NULL_POINTER = 1,
  ECGTN_STATUS_INVALID_ARGUMENT = 2,
  ECGTN_STATUS_IO = 3,
  ECGTN_STATUS_CORRUPT_ARCHIVE = 4,
  ECGTN_STATUS_LEAD_MISMATCH = 5,
  ECGTN_STATUS_BUFFER_TOO_SMALL = 6,
  ECGTN_STATUS_NUMERIC = 7,
  ECGTN_STATUS_PANIC = 8,
} EcgtnStatus;

// Opaque model handle.
typedef struct EcgtnModel EcgtnModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL. The pointer is
// valid until the next call on the same thread.
const char *ecgtn_last_error(void);

// Library version as a static NUL-terminated string.
const char *ecgtn_version(void);

// Load a weights archive. On success `*out` owns a new handle that must be
// released with [`ecgtn_model_free`].
//
// # Safety
// `path` must be a NUL-terminated string and `out` a valid pointer.
enum EcgtnStatus ecgtn_model_load(const char *path, struct EcgtnModel **out);

// Release a handle. NULL is ignored.
//
// # Safety
// `model` must come from [`ecgtn_model_load`] and not be used afterwards.
void ecgtn_model_free(struct EcgtnModel *model);

// Number of output classes, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t ecgtn_model_num_classes(const struct EcgtnModel *model);

// Number of input leads the model expects, or 0 for NULL.
//
// # Safety
// `model` must be NULL or a live handle.
size_t ecgtn_model_input_leads(const struct EcgtnModel *model);

// Name of class `index`, or NULL when out of range. Owned by the handle.
//
// # Safety
// `model` must be NULL or a live handle.
const char *ecgtn_model_class_name(const struct EcgtnModel *model, size_t index);

// Eval-mode class probabilities for `batch` records.
//
// `signal` holds `batch * leads * samples` floats, record-major then
// lead-major, already preprocessed. `probs` receives `batch * num_classes`
// floats; `probs_len` is its capacity in elements.
//
// # Safety
// `signal` and `probs` must point to at least the stated number of floats.
enum EcgtnStatus ecgtn_predict(const struct EcgtnModel *model,
                               const float *signal,
                               size_t batch,
                               size_t leads,
                               size_t samples,
                               float *probs,
                               size_t probs_len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ECG_TINYNET_H */
