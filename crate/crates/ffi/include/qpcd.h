#ifndef QPCD_H
#define QPCD_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum QpcdStatus {
  QPCD_STATUS_OK = 0,
  QPCD_STATUS_NULL_POINTER = 1,
  QPCD_STATUS_INVALID_UTF8 = 2,
  QPCD_STATUS_INVALID_ARGUMENT = 3,
  QPCD_STATUS_SERIES_TOO_SHORT = 4,
  QPCD_STATUS_IO = 5,
  QPCD_STATUS_JSON = 6,
  QPCD_STATUS_INTERNAL = 7,
  QPCD_STATUS_PANIC = 8,
} QpcdStatus;

// Pipeline configuration.
typedef struct QpcdConfig QpcdConfig;

// Outcome of one detection run.
typedef struct QpcdDetection QpcdDetection;

// Scalar summary of a detection.
typedef struct QpcdSummary {
  bool change_detected;
  double statistic;
  double threshold;
  // Window position of the maximum, in embedded points.
  size_t argmax_tau;
  size_t n_flagged;
  size_t n_series;
} QpcdSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Message for the last failed call on this thread, or null. The pointer
// stays valid until the next call into this library on the same thread.
const char *qpcd_last_error(void);

// Library version as a static NUL-terminated string.
const char *qpcd_version(void);

// Default configuration.
//
// # Safety
// `out` must be a valid pointer to writable storage.
enum QpcdStatus qpcd_config_new(struct QpcdConfig **out);

// Configuration parsed from JSON; absent keys take their defaults.
//
// # Safety
// `json` must be a NUL-terminated string and `out` writable.
enum QpcdStatus qpcd_config_from_json(const char *json, struct QpcdConfig **out);

// Applies a `dotted.key=value` override. The configuration is unchanged
// when the override is rejected.
//
// # Safety
// `cfg` must come from this library and `assignment` be NUL-terminated.
enum QpcdStatus qpcd_config_set(struct QpcdConfig *cfg, const char *assignment);

// Configuration as JSON; release with [`qpcd_string_free`].
//
// # Safety
// `cfg` must come from this library and `out` be writable.
enum QpcdStatus qpcd_config_to_json(const struct QpcdConfig *cfg, char **out);

// # Safety
// `cfg` must come from this library or be null, and not be used afterwards.
void qpcd_config_free(struct QpcdConfig *cfg);

// Runs the full pipeline on `len` samples recorded at `sample_rate` Hz.
// `QPCD_THREADS` caps the worker threads as for the command line tool.
//
// # Safety
// `cfg` must come from this library, `samples` point to `len` doubles and
// `out` be writable.
enum QpcdStatus qpcd_detect(const struct QpcdConfig *cfg,
                            const double *samples,
                            size_t len,
                            double sample_rate,
                            struct QpcdDetection **out);

// # Safety
// `det` must come from this library and `out` be writable.
enum QpcdStatus qpcd_detection_summary(const struct QpcdDetection *det, struct QpcdSummary *out);

// Half-open sample range `[start, end)` of flagged interval `index`.
//
// # Safety
// `det` must come from this library; `start` and `end` must be writable.
enum QpcdStatus qpcd_detection_flagged(const struct QpcdDetection *det,
                                       size_t index,
                                       size_t *start,
                                       size_t *end);

// Copies up to `cap` series values into `buf` and stores the full length
// in `total`. Pass `cap = 0` to query the length.
//
// # Safety
// `det` must come from this library, `buf` hold `cap` doubles and `total`
// be writable.
enum QpcdStatus qpcd_detection_series(const struct QpcdDetection *det,
                                      double *buf,
                                      size_t cap,
                                      size_t *total);

// Canonical report JSON, without timings; release with
// [`qpcd_string_free`].
//
// # Safety
// `det` must come from this library and `out` be writable.
enum QpcdStatus qpcd_detection_to_json(const struct QpcdDetection *det, char **out);

// # Safety
// `det` must come from this library or be null, and not be used afterwards.
void qpcd_detection_free(struct QpcdDetection *det);

// `W_p` between uniform measures on `n` and `m` row-major points of
// dimension `dim`. Exact when `exact` is set, otherwise Sinkhorn with
// default settings.
//
// # Safety
// `x` must point to `n * dim` doubles, `y` to `m * dim` and `out` be
// writable.
enum QpcdStatus qpcd_wasserstein(const double *x,
                                 size_t n,
                                 const double *y,
                                 size_t m,
                                 size_t dim,
                                 double p,
                                 bool exact,
                                 double *out);

// # Safety
// `s` must come from this library or be null, and not be used afterwards.
void qpcd_string_free(char *s);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* QPCD_H */
