#ifndef ASSO_H
#define ASSO_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

// Status codes. The nonzero library classes match the CLI exit codes.
typedef enum AssoStatus {
  ASSO_STATUS_OK = 0,
  ASSO_STATUS_NULL_POINTER = 1,
  ASSO_STATUS_USAGE = 2,
  ASSO_STATUS_IO = 3,
  ASSO_STATUS_CONFIG = 4,
  ASSO_STATUS_NUMERIC = 5,
  ASSO_STATUS_OUT_OF_RANGE = 6,
  ASSO_STATUS_UTF8 = 7,
  ASSO_STATUS_PANIC = 8,
} AssoStatus;

// Why extraction stopped.
typedef enum AssoStop {
  ASSO_STOP_BELOW_THRESHOLD = 0,
  ASSO_STOP_MAX_COMPONENTS = 1,
  ASSO_STOP_NO_PEAK = 2,
  ASSO_STOP_EMPTY_RIDGE = 3,
  ASSO_STOP_DEGENERATE_WINDOW = 4,
} AssoStop;

// Separation settings.
typedef struct AssoConfigHandle AssoConfigHandle;

// Output of one separation run.
typedef struct AssoResultHandle AssoResultHandle;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

// Library version as a static NUL-terminated string.
const char *asso_version(void);

// Message for the last failed call on this thread, or NULL.
//
// The pointer stays valid until the next library call on the same thread.
const char *asso_last_error(void);

// Creates a configuration with default settings.
//
// # Safety
// `out` must be a valid pointer to writable storage for one handle pointer.
enum AssoStatus asso_config_new(struct AssoConfigHandle **out);

// Parses a configuration from TOML text.
//
// # Safety
// `toml` must be a NUL-terminated string; `out` as in [`asso_config_new`].
enum AssoStatus asso_config_from_toml(const char *toml, struct AssoConfigHandle **out);

// Sets one key, using the same `key=value` syntax as the CLI `--set` flag.
//
// # Safety
// `config` must come from this library; `key` and `value` must be
// NUL-terminated strings.
enum AssoStatus asso_config_set(struct AssoConfigHandle *config,
                                const char *key,
                                const char *value);

// Releases a configuration. NULL is ignored.
//
// # Safety
// `config` must come from this library and not be used afterwards.
void asso_config_free(struct AssoConfigHandle *config);

// Separates `len` uniformly sampled values taken at `sample_rate` Hz.
//
// `config` may be NULL for the defaults. On success `*out` receives a new
// result handle.
//
// # Safety
// `samples` must point to `len` readable doubles; `config` must be NULL or
// come from this library; `out` must be writable.
enum AssoStatus asso_separate(const double *samples,
                              size_t len,
                              double sample_rate,
                              const struct AssoConfigHandle *config,
                              struct AssoResultHandle **out);

// Number of input samples; every full-length output has this size.
//
// # Safety
// `result` must come from this library.
size_t asso_result_len(const struct AssoResultHandle *result);

// Number of extracted components.
//
// # Safety
// `result` must come from this library.
size_t asso_result_component_count(const struct AssoResultHandle *result);

// Why extraction stopped.
//
// # Safety
// `result` must come from this library; `out` must be writable.
enum AssoStatus asso_result_stop_reason(const struct AssoResultHandle *result, enum AssoStop *out);

// Copies the trend into `out` (capacity `cap`, at least the result length).
//
// # Safety
// `result` must come from this library; `out` must hold `cap` doubles.
enum AssoStatus asso_result_trend(const struct AssoResultHandle *result, double *out, size_t cap);

// Copies the residual into `out`.
//
// # Safety
// As for [`asso_result_trend`].
enum AssoStatus asso_result_residual(const struct AssoResultHandle *result,
                                     double *out,
                                     size_t cap);

// Copies component `k`, zero outside its support, into `out`.
//
// # Safety
// As for [`asso_result_trend`].
enum AssoStatus asso_result_component(const struct AssoResultHandle *result,
                                      size_t k,
                                      double *out,
                                      size_t cap);

// Support of component `k` as the half-open sample range `[start, end)`.
//
// # Safety
// `result` must come from this library; `start` and `end` must be writable.
enum AssoStatus asso_result_support(const struct AssoResultHandle *result,
                                    size_t k,
                                    size_t *start,
                                    size_t *end);

// Copies the ridge frequency of component `k` (Hz, one value per support
// sample) into `out`.
//
// # Safety
// As for [`asso_result_trend`].
enum AssoStatus asso_result_ridge(const struct AssoResultHandle *result,
                                  size_t k,
                                  double *out,
                                  size_t cap);

// Copies the chirp-rate track of component `k` (Hz/s) into `out`.
//
// # Safety
// As for [`asso_result_trend`].
enum AssoStatus asso_result_chirp_rate(const struct AssoResultHandle *result,
                                       size_t k,
                                       double *out,
                                       size_t cap);

// Releases a result. NULL is ignored.
//
// # Safety
// `result` must come from this library and not be used afterwards.
void asso_result_free(struct AssoResultHandle *result);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ASSO_H */
