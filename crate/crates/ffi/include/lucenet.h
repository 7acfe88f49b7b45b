#ifndef LUCENET_H
#define LUCENET_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum LucenetStatus {
  LUCENET_STATUS_OK = 0,
  LUCENET_STATUS_NULL_POINTER = 1,
  LUCENET_STATUS_INVALID_ARGUMENT = 2,
  LUCENET_STATUS_IO = 3,
  LUCENET_STATUS_FORMAT = 4,
  LUCENET_STATUS_SHAPE = 5,
  LUCENET_STATUS_RUNTIME = 6,
} LucenetStatus;

/**
 * Opaque model handle.
 */
typedef struct LucenetModel LucenetModel;

/**
 * Confusion metrics; NaN marks an undefined ratio (zero denominator).
 */
typedef struct LucenetMetrics {
  double sensitivity;
  double specificity;
  double accuracy;
} LucenetMetrics;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version, a static NUL-terminated string.
 */
const char *lucenet_version(void);

/**
 * Message of the last failed call on this thread, or null after a success.
 * The caller owns the copy and frees it with `lucenet_string_free`.
 */
char *lucenet_last_error(void);

/**
 * Frees a string returned by this library. Null is ignored.
 *
 * # Safety
 * `s` must come from this library and not have been freed.
 */
void lucenet_string_free(char *s);

/**
 * Builds a randomly initialized model (Gaussian weights, std 0.05) with the
 * default head. `layout` lists the dense layers per block.
 *
 * # Safety
 * `layout` must point to `layout_len` values; `out` must be writable.
 */
enum LucenetStatus lucenet_model_build(size_t input_size,
                                       size_t stem_filters,
                                       size_t growth_rate,
                                       const size_t *layout,
                                       size_t layout_len,
                                       uint64_t seed,
                                       struct LucenetModel **out);

/**
 * Loads a full-model checkpoint.
 *
 * # Safety
 * `path` must be a NUL-terminated string; `out` must be writable.
 */
enum LucenetStatus lucenet_model_load(const char *path, struct LucenetModel **out);

/**
 * Writes a full-model checkpoint.
 *
 * # Safety
 * `model` must be a live handle and `path` a NUL-terminated string.
 */
enum LucenetStatus lucenet_model_save(const struct LucenetModel *model, const char *path);

/**
 * Releases a model handle. Null is ignored.
 *
 * # Safety
 * `model` must come from this library and not have been freed.
 */
void lucenet_model_free(struct LucenetModel *model);

/**
 * Side of the square input the model expects; 0 for a null handle.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t lucenet_model_input_size(const struct LucenetModel *model);

/**
 * SHA-256 of the serialized model, hex encoded; free with `lucenet_string_free`.
 *
 * # Safety
 * `model` must be a live handle; `out` must be writable.
 */
enum LucenetStatus lucenet_model_fingerprint(const struct LucenetModel *model, char **out);

/**
 * Inference logits for `count` row-major images of `input_size`² pixels in [0, 1].
 *
 * # Safety
 * `pixels` must hold `count * input_size²` floats and `logits` room for `count`.
 */
enum LucenetStatus lucenet_model_predict(const struct LucenetModel *model,
                                         const float *pixels,
                                         size_t count,
                                         float *logits);

/**
 * |d logit / d pixel| for one `width` x `height` image, written to `map`.
 *
 * # Safety
 * `pixels` and `map` must each hold `width * height` floats.
 */
enum LucenetStatus lucenet_saliency(const struct LucenetModel *model,
                                    const float *pixels,
                                    size_t width,
                                    size_t height,
                                    float *map);

/**
 * ROC AUC of `scores` against `labels` (nonzero = positive). Both classes
 * must be present.
 *
 * # Safety
 * `scores` and `labels` must each hold `n` values; `out` must be writable.
 */
enum LucenetStatus lucenet_auc(const double *scores, const uint8_t *labels, size_t n, double *out);

/**
 * Sensitivity, specificity and accuracy from confusion counts.
 *
 * # Safety
 * `out` must be writable.
 */
enum LucenetStatus lucenet_metrics(size_t tp,
                                   size_t fp,
                                   size_t tn,
                                   size_t fn_,
                                   struct LucenetMetrics *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* LUCENET_H */
