/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#ifndef FACEVEIL_H
#define FACEVEIL_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Result code of every fallible call.
typedef enum FvStatus {
  FV_STATUS_OK = 0,
  FV_STATUS_NULL_POINTER = 1,
  FV_STATUS_INVALID_UTF8 = 2,
  FV_STATUS_INVALID_ARGUMENT = 3,
  FV_STATUS_IO = 4,
  FV_STATUS_FILTER = 5,
  FV_STATUS_DETECT = 6,
  FV_STATUS_CASCADE = 7,
  FV_STATUS_EVAL = 8,
  FV_STATUS_BUFFER_TOO_SMALL = 9,
  FV_STATUS_PANIC = 10,
} FvStatus;

// A face detector (built-in cascade or external process/HTTP endpoint).
typedef struct FvDetector FvDetector;

// An 8-bit image with 1 or 3 interleaved channels.
typedef struct FvImage FvImage;

// A detection box in pixel coordinates.
typedef struct FvBox {
  double x;
  double y;
  double w;
  double h;
  // Raw windows merged into this box.
  uint32_t support;
} FvBox;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message of the last failed call on this thread, or NULL after a success.
// Valid until the next call on this thread.
const char *fv_last_error_message(void);

// Library version as a static NUL-terminated string.
const char *fv_version(void);

// Releases a string returned by this library. NULL is ignored.
//
// # Safety
// `s` must come from this library and not have been freed.
void fv_string_free(char *s);

// Creates an image from `len` interleaved samples (`len == width * height * channels`).
//
// # Safety
// `data` must point to `len` readable bytes; `out` must be writable.
enum FvStatus fv_image_new(uint32_t width,
                           uint32_t height,
                           uint8_t channels,
                           const uint8_t *data,
                           size_t len,
                           struct FvImage **out);

// Loads a PNG or baseline JPEG file.
//
// # Safety
// `path` must be a NUL-terminated string; `out` must be writable.
enum FvStatus fv_image_load(const char *path, struct FvImage **out);

// Writes the image as PNG.
//
// # Safety
// `image` must be a live handle and `path` a NUL-terminated string.
enum FvStatus fv_image_save(const struct FvImage *image, const char *path);

// # Safety
// `image` must be a live handle or NULL.
uint32_t fv_image_width(const struct FvImage *image);

// # Safety
// `image` must be a live handle or NULL.
uint32_t fv_image_height(const struct FvImage *image);

// # Safety
// `image` must be a live handle or NULL.
uint8_t fv_image_channels(const struct FvImage *image);

// Borrowed pointer to the samples, valid while the image lives. Writes the sample count to `len`.
//
// # Safety
// `image` must be a live handle or NULL; `len` must be writable or NULL.
const uint8_t *fv_image_data(const struct FvImage *image, size_t *len);

// # Safety
// `image` must come from this library and not have been freed. NULL is ignored.
void fv_image_free(struct FvImage *image);

// Applies a filter spec (JSON) to an image. `face_json` is an optional face
// annotation (box plus eye keypoints) used by region filters; pass NULL to omit.
//
// # Safety
// Pointers must be valid as documented; `out` must be writable.
enum FvStatus fv_filter_apply(const char *spec_json,
                              const struct FvImage *image,
                              const char *face_json,
                              struct FvImage **out);

// Built-in detector. `cascade_path` selects an XML or JSON cascade (NULL for the
// bundled one); `config_json` overrides scan settings (NULL for defaults).
//
// # Safety
// String arguments must be NULL or NUL-terminated; `out` must be writable.
enum FvStatus fv_detector_builtin(const char *cascade_path,
                                  const char *config_json,
                                  struct FvDetector **out);

// External detector from a JSON endpoint configuration, e.g.
// `{"endpoint": {"kind": "http", "url": "http://127.0.0.1:9000/"}}`.
//
// # Safety
// `config_json` must be NUL-terminated; `out` must be writable.
enum FvStatus fv_detector_external(const char *config_json, struct FvDetector **out);

// Detector identifier as a new string (free with [`fv_string_free`]); NULL for a NULL handle.
//
// # Safety
// `detector` must be a live handle or NULL.
char *fv_detector_id(const struct FvDetector *detector);

// Runs the detector. Up to `capacity` boxes are written to `boxes`; the total
// count goes to `count`. Returns `BufferTooSmall` when `count > capacity`, so
// callers may query with `capacity = 0` first.
//
// # Safety
// `boxes` must have room for `capacity` entries (or be NULL with capacity 0); `count` must be writable.
enum FvStatus fv_detector_detect(const struct FvDetector *detector,
                                 const struct FvImage *image,
                                 struct FvBox *boxes,
                                 size_t capacity,
                                 size_t *count);

// # Safety
// `detector` must come from this library and not have been freed. NULL is ignored.
void fv_detector_free(struct FvDetector *detector);

// Evaluates a filter spec over `n_manifests` JSONL manifests and returns the
// JSON report in `report_json` (free with [`fv_string_free`]). `options_json`
// holds scoring options or is NULL for defaults.
//
// # Safety
// `manifests` must hold `n_manifests` NUL-terminated strings; `report_json` must be writable.
enum FvStatus fv_evaluate(const char *const *manifests,
                          size_t n_manifests,
                          const char *spec_json,
                          const struct FvDetector *detector,
                          const char *options_json,
                          char **report_json);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* FACEVEIL_H */
