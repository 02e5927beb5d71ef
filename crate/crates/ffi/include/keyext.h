#ifndef KEYEXT_H
#define KEYEXT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  KEYEXT_STATUS_OK = 0,
  KEYEXT_STATUS_NULL_POINTER = 1,
  KEYEXT_STATUS_INVALID_ARGUMENT = 2,
  KEYEXT_STATUS_CONFIG = 3,
  KEYEXT_STATUS_QUBIT_CAP = 4,
  KEYEXT_STATUS_UNSUPPORTED = 5,
  KEYEXT_STATUS_BUFFER_TOO_SMALL = 6,
  KEYEXT_STATUS_IO = 7,
  /**
   * A panic was caught at the boundary.
   */
  KEYEXT_STATUS_INTERNAL = 8,
} KeyextStatus;

/**
 * A keyed construction instance.
 */
typedef struct KeyextConstruction KeyextConstruction;

/**
 * A validated experiment config.
 */
typedef struct KeyextExperiment KeyextExperiment;

/**
 * The report of an experiment run.
 */
typedef struct KeyextReport KeyextReport;

/**
 * Library version as a static NUL-terminated string.
 */
const char *keyext_version(void);

/**
 * Copies the calling thread's last error message into `buf`. Leaves the
 * message in place, so a size query can precede the read.
 *
 * # Safety
 * `buf` must be writable for `len` bytes; `needed` may be null.
 */
KeyextStatus keyext_last_error(char *buf, size_t len, size_t *needed);

/**
 * A random instance of `kind` (e.g. "EFX", "TWO_XOR", "EM") with ideal
 * ciphers, deterministic in `seed`.
 *
 * # Safety
 * `kind` must be a NUL-terminated string and `out` writable.
 */
KeyextStatus keyext_construction_random(const char *kind,
                                        uint32_t n,
                                        uint32_t kappa,
                                        uint64_t seed,
                                        KeyextConstruction **out);

/**
 * One online encryption query.
 *
 * # Safety
 * `handle` must come from `keyext_construction_random`; `out` writable.
 */
KeyextStatus keyext_construction_encrypt(const KeyextConstruction *handle,
                                         uint32_t x,
                                         uint32_t *out);

/**
 * Online queries made so far, forward plus backward.
 *
 * # Safety
 * `handle` must be a live construction handle; `out` writable.
 */
KeyextStatus keyext_construction_queries(const KeyextConstruction *handle, uint64_t *out);

/**
 * # Safety
 * `handle` must be null or come from `keyext_construction_random`, and
 * must not be used afterwards.
 */
void keyext_construction_free(KeyextConstruction *handle);

/**
 * Parses and validates a TOML experiment config.
 *
 * # Safety
 * `toml` must be a NUL-terminated string and `out` writable.
 */
KeyextStatus keyext_experiment_from_toml(const char *toml, KeyextExperiment **out);

/**
 * Overrides the base seed of an experiment.
 *
 * # Safety
 * `handle` must be a live experiment handle.
 */
KeyextStatus keyext_experiment_set_seed(KeyextExperiment *handle, uint64_t seed);

/**
 * Runs every trial of the experiment.
 *
 * # Safety
 * `handle` must be a live experiment handle and `out` writable.
 */
KeyextStatus keyext_experiment_run(const KeyextExperiment *handle, KeyextReport **out);

/**
 * # Safety
 * `handle` must be null or a live experiment handle, unused afterwards.
 */
void keyext_experiment_free(KeyextExperiment *handle);

/**
 * Trial and success counts of a report.
 *
 * # Safety
 * `handle` must be a live report handle; both outputs writable.
 */
KeyextStatus keyext_report_counts(const KeyextReport *handle,
                                  uint64_t *trials,
                                  uint64_t *successes);

/**
 * Copies the JSON report into `buf`.
 *
 * # Safety
 * `handle` must be a live report handle; `buf` writable for `len` bytes;
 * `needed` may be null.
 */
KeyextStatus keyext_report_json(const KeyextReport *handle, char *buf, size_t len, size_t *needed);

/**
 * # Safety
 * `handle` must be null or a live report handle, unused afterwards.
 */
void keyext_report_free(KeyextReport *handle);

/**
 * Both classical EFX advantage bounds at (n, κ, D, T).
 *
 * # Safety
 * `small_d` and `any_d` must be writable.
 */
KeyextStatus keyext_efx_bound(uint32_t n,
                              uint32_t kappa,
                              double d,
                              double t,
                              double *small_d,
                              double *any_d);

/**
 * Runs every verification suite; `passed` receives 1 or 0.
 *
 * # Safety
 * `passed` must be writable.
 */
KeyextStatus keyext_verify(uint64_t seed, int32_t *passed);

#endif  /* KEYEXT_H */
