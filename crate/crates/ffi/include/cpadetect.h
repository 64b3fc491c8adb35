#ifndef CPADETECT_H
#define CPADETECT_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CpdStatus {
  CPD_STATUS_OK = 0,
  CPD_STATUS_NULL_POINTER = 1,
  CPD_STATUS_INVALID_CONFIG = 2,
  CPD_STATUS_INVALID_ARGUMENT = 3,
  CPD_STATUS_INSUFFICIENT_HISTORY = 4,
  CPD_STATUS_INVALID_OBSERVATION = 5,
  CPD_STATUS_INVALID_UTF8 = 6,
  CPD_STATUS_INTERNAL = 7,
} CpdStatus;

typedef struct CpdDetector CpdDetector;

typedef struct CpdLfm CpdLfm;

typedef struct CpdSketchConfig {
  uint32_t hash_bits;
  uint32_t substrings;
  size_t bitmaps;
  uint32_t hash_seed;
  uint64_t pattern_seed;
} CpdSketchConfig;

typedef struct CpdThresholdConfig {
  double alpha;
  size_t sample_size;
  size_t resamples;
  double growth_step;
  uint64_t rng_seed;
} CpdThresholdConfig;

/**
 * One alarm of the most recent epoch. `prefix` stays valid until the next
 * `cpd_detector_end_epoch` or `cpd_detector_free` on the same detector.
 */
typedef struct CpdAlarm {
  uint64_t epoch_index;
  double statistic;
  double threshold;
  double wall_time;
  const char *prefix;
} CpdAlarm;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *cpd_last_error(void);

/**
 * Static description of a status code.
 */
const char *cpd_status_message(enum CpdStatus status);

struct CpdSketchConfig cpd_sketch_config_default(void);

struct CpdThresholdConfig cpd_threshold_config_default(void);

/**
 * Create a sketch. A null `config` selects the defaults.
 *
 * # Safety
 * `config` must be null or point to a valid config; `out` must be writable.
 */
enum CpdStatus cpd_lfm_new(const struct CpdSketchConfig *config, struct CpdLfm **out);

/**
 * # Safety
 * `sketch` must come from `cpd_lfm_new` and not be used afterwards.
 */
void cpd_lfm_free(struct CpdLfm *sketch);

/**
 * # Safety
 * `sketch` must be a live handle; `item` must point to `len` readable bytes
 * (it may be null when `len` is 0).
 */
enum CpdStatus cpd_lfm_insert(struct CpdLfm *sketch, const uint8_t *item, size_t len);

/**
 * # Safety
 * `sketch` must be a live handle and `out` writable.
 */
enum CpdStatus cpd_lfm_estimate(const struct CpdLfm *sketch, double *out);

/**
 * Harmonic mean of the registers' leftmost-zero indices.
 *
 * # Safety
 * `sketch` must be a live handle and `out` writable.
 */
enum CpdStatus cpd_lfm_statistic(const struct CpdLfm *sketch, double *out);

/**
 * # Safety
 * `sketch` must be a live handle and `out` writable.
 */
enum CpdStatus cpd_lfm_insert_count(const struct CpdLfm *sketch, uint64_t *out);

/**
 * Copy the `N` registers, bit 0 of each in its most significant used bit.
 * `len` must equal the sketch's bitmap count.
 *
 * # Safety
 * `sketch` must be a live handle and `out` must have room for `len` values.
 */
enum CpdStatus cpd_lfm_registers(const struct CpdLfm *sketch, uint64_t *out, size_t len);

/**
 * # Safety
 * `sketch` must be a live handle.
 */
enum CpdStatus cpd_lfm_reset(struct CpdLfm *sketch);

/**
 * Create an ELDA detector. Null configs select the defaults.
 *
 * # Safety
 * Config pointers must be null or valid; `out` must be writable.
 */
enum CpdStatus cpd_detector_new(const struct CpdSketchConfig *sketch,
                                const struct CpdThresholdConfig *threshold,
                                struct CpdDetector **out);

/**
 * # Safety
 * `detector` must come from `cpd_detector_new` and not be used afterwards.
 */
void cpd_detector_free(struct CpdDetector *detector);

/**
 * Feed one interest name (NUL-terminated UTF-8). Names without a `/`
 * prefix component are ignored.
 *
 * # Safety
 * `detector` must be a live handle and `name` a valid C string.
 */
enum CpdStatus cpd_detector_observe(struct CpdDetector *detector, const char *name);

/**
 * Close the current epoch; writes the number of alarms raised to `count`.
 *
 * # Safety
 * `detector` must be a live handle and `count` writable.
 */
enum CpdStatus cpd_detector_end_epoch(struct CpdDetector *detector, size_t *count);

/**
 * # Safety
 * `detector` must be a live handle and `out` writable.
 */
enum CpdStatus cpd_detector_alarm(const struct CpdDetector *detector,
                                  size_t index,
                                  struct CpdAlarm *out);

/**
 * Threshold for the next statistic given the `len` most recent values.
 * A null `config` selects the defaults.
 *
 * # Safety
 * `values` must point to `len` readable doubles and `out` be writable.
 */
enum CpdStatus cpd_mc_threshold(const double *values,
                                size_t len,
                                const struct CpdThresholdConfig *config,
                                double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CPADETECT_H */
