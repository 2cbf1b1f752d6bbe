#ifndef PATCHBLUR_H
#define PATCHBLUR_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stddef.h>
#include <stdint.h>

// Result code of every fallible call.
typedef enum PbStatus {
  PB_STATUS_OK = 0,
  // Null pointer, non-UTF-8 path, or an out-of-range argument.
  PB_STATUS_INVALID_ARGUMENT = 1,
  // File could not be read or decoded.
  PB_STATUS_UNREADABLE = 2,
  // Image dimensions are unusable for the requested operation.
  PB_STATUS_INVALID_IMAGE = 3,
  // Model document is malformed or its configuration is unknown.
  PB_STATUS_MODEL_FORMAT = 4,
  // Feature vector length or model configuration does not match.
  PB_STATUS_SHAPE_MISMATCH = 5,
  // A feature value is NaN or infinite.
  PB_STATUS_NON_FINITE = 6,
  // Output buffer too small; the required length was written back.
  PB_STATUS_BUFFER_TOO_SMALL = 7,
  PB_STATUS_IO = 8,
  PB_STATUS_INTERNAL = 9,
} PbStatus;

// Grayscale image with intensities in [0, 1].
typedef struct PbImage PbImage;

// Trained classifier together with the feature layout it expects.
typedef struct PbModel PbModel;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *pb_version(void);

// Message for the most recent failure on the calling thread; empty if none.
// The pointer stays valid until the next failing call on this thread.
const char *pb_last_error_message(void);

// Decodes an image file (PNG or JPEG) to grayscale.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum PbStatus pb_image_load(const char *path, struct PbImage **out);

// Wraps 8-bit grayscale pixels. `stride` is the byte distance between rows
// (at least `width`).
//
// # Safety
// `pixels` must point to `stride * height` readable bytes; `out` must be
// writable.
enum PbStatus pb_image_from_gray8(const uint8_t *pixels,
                                  size_t width,
                                  size_t height,
                                  size_t stride,
                                  struct PbImage **out);

// # Safety
// `img` must be null or a handle from this library not yet freed.
void pb_image_free(struct PbImage *img);

// Width in pixels; 0 for a null handle.
//
// # Safety
// `img` must be null or a live image handle.
size_t pb_image_width(const struct PbImage *img);

// Height in pixels; 0 for a null handle.
//
// # Safety
// `img` must be null or a live image handle.
size_t pb_image_height(const struct PbImage *img);

// Loads a model document written by `patchblur train`.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum PbStatus pb_model_load(const char *path, struct PbModel **out);

// # Safety
// `model` must be null or a handle from this library not yet freed.
void pb_model_free(struct PbModel *model);

// Feature vector length the model expects; 0 for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
size_t pb_model_n_features(const struct PbModel *model);

// Feature configuration id, e.g. `lbp-grid/g7/t0.016/w21/e1e-12`. Owned by
// the model; valid until `pb_model_free`. Null for a null handle.
//
// # Safety
// `model` must be null or a live model handle.
const char *pb_model_config_id(const struct PbModel *model);

// Extracts the model's feature vector from `img` into `out[0..len]`.
// `written` receives the vector length; when `len` is too small nothing is
// copied and `PB_STATUS_BUFFER_TOO_SMALL` is returned.
//
// # Safety
// Handles must be live; `out` must have room for `len` doubles; `written`
// must be writable.
enum PbStatus pb_extract_features(const struct PbModel *model,
                                  const struct PbImage *img,
                                  double *out,
                                  size_t len,
                                  size_t *written);

// Blur probability for a precomputed feature vector.
//
// # Safety
// `model` must be live; `features` must point to `len` doubles;
// `probability` must be writable.
enum PbStatus pb_predict_proba(const struct PbModel *model,
                               const double *features,
                               size_t len,
                               double *probability);

// Extracts features and classifies in one call. `label` receives 1 (blur)
// when the probability exceeds `threshold`, else 0 (sharp). Either output
// pointer may be null.
//
// # Safety
// Handles must be live; non-null outputs must be writable.
enum PbStatus pb_classify_image(const struct PbModel *model,
                                const struct PbImage *img,
                                double threshold,
                                double *probability,
                                uint8_t *label);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PATCHBLUR_H */
