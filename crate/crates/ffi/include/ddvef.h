#ifndef DDVEF_H
#define DDVEF_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Diffusion model selector.
 */
typedef enum DdvefModel {
  DDVEF_MODEL_P1 = 0,
  DDVEF_MODEL_P1_OVER3 = 1,
  DDVEF_MODEL_FLD = 2,
} DdvefModel;

/**
 * Built-in problem sizes.
 */
typedef enum DdvefScale {
  DDVEF_SCALE_FULL = 0,
  DDVEF_SCALE_CI = 1,
} DdvefScale;

/**
 * Result of every fallible call.
 */
typedef enum DdvefStatus {
  DDVEF_STATUS_OK = 0,
  DDVEF_STATUS_NULL_POINTER = 1,
  DDVEF_STATUS_INVALID_ARGUMENT = 2,
  DDVEF_STATUS_CONFIG = 3,
  DDVEF_STATUS_FILE_NOT_FOUND = 4,
  DDVEF_STATUS_IO = 5,
  DDVEF_STATUS_FORMAT = 6,
  DDVEF_STATUS_DIMENSION = 7,
  DDVEF_STATUS_NON_CONVERGENCE = 8,
  DDVEF_STATUS_NUMERICAL = 9,
  DDVEF_STATUS_PANIC = 10,
} DdvefStatus;

/**
 * Run configuration.
 */
typedef struct DdvefConfig DdvefConfig;

/**
 * Solution history: temperature and radiation moments at every time level.
 */
typedef struct DdvefHistory DdvefHistory;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread. The pointer stays valid
 * until the next failing call on the same thread.
 */
const char *ddvef_last_error(void);

/**
 * Built-in configuration of the given scale.
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for a handle.
 */
enum DdvefStatus ddvef_config_new(enum DdvefScale scale, struct DdvefConfig **out);

/**
 * Configuration from the text of a configuration file.
 *
 * # Safety
 * `text` must be a NUL-terminated string and `out` valid for writes.
 */
enum DdvefStatus ddvef_config_parse(const char *text, struct DdvefConfig **out);

/**
 * Configuration read from a file.
 *
 * # Safety
 * `path` must be a NUL-terminated string and `out` valid for writes.
 */
enum DdvefStatus ddvef_config_from_file(const char *path, struct DdvefConfig **out);

/**
 * Mesh size, group count and number of time steps of a configuration.
 * Null output pointers are skipped.
 *
 * # Safety
 * `cfg` must be a live handle; non-null outputs must be valid for writes.
 */
enum DdvefStatus ddvef_config_dims(const struct DdvefConfig *cfg,
                                   size_t *nx,
                                   size_t *ny,
                                   size_t *groups,
                                   size_t *steps);

/**
 * # Safety
 * `cfg` must be null or a handle not yet freed.
 */
void ddvef_config_free(struct DdvefConfig *cfg);

/**
 * Run the full-order transport model.
 *
 * # Safety
 * `cfg` must be a live handle and `out` valid for writes.
 */
enum DdvefStatus ddvef_run_fom(const struct DdvefConfig *cfg, struct DdvefHistory **out);

/**
 * Run a diffusion model.
 *
 * # Safety
 * `cfg` must be a live handle and `out` valid for writes.
 */
enum DdvefStatus ddvef_run_diffusion(const struct DdvefConfig *cfg,
                                     enum DdvefModel model,
                                     struct DdvefHistory **out);

/**
 * Run the VEF model closed by transport on the temperatures of
 * `temperatures`.
 *
 * # Safety
 * `cfg` and `temperatures` must be live handles and `out` valid for writes.
 */
enum DdvefStatus ddvef_run_vef(const struct DdvefConfig *cfg,
                               const struct DdvefHistory *temperatures,
                               struct DdvefHistory **out);

/**
 * Number of time levels, the initial one included. Zero for null.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t ddvef_history_levels(const struct DdvefHistory *h);

/**
 * Number of cells. Zero for null.
 *
 * # Safety
 * `h` must be null or a live handle.
 */
size_t ddvef_history_cells(const struct DdvefHistory *h);

/**
 * Time of level `n` [ns].
 *
 * # Safety
 * `h` must be a live handle and `time` valid for writes.
 */
enum DdvefStatus ddvef_history_time(const struct DdvefHistory *h, size_t n, double *time);

/**
 * Cell temperatures of level `n` [KeV] into `buf` of `len` values.
 *
 * # Safety
 * `h` must be a live handle and `buf` valid for `len` writes.
 */
enum DdvefStatus ddvef_history_temperature(const struct DdvefHistory *h,
                                           size_t n,
                                           double *buf,
                                           size_t len);

/**
 * Group-summed radiation energy density of level `n` [Jerk/cm^3].
 *
 * # Safety
 * `h` must be a live handle and `buf` valid for `len` writes.
 */
enum DdvefStatus ddvef_history_energy(const struct DdvefHistory *h,
                                      size_t n,
                                      double *buf,
                                      size_t len);

/**
 * Write a history to a dataset file.
 *
 * # Safety
 * `h` must be a live handle and `path` a NUL-terminated string.
 */
enum DdvefStatus ddvef_history_write(const struct DdvefHistory *h, const char *path);

/**
 * Read a history from a dataset file; the domain size comes from `cfg`.
 *
 * # Safety
 * `cfg` must be a live handle, `path` a NUL-terminated string and `out`
 * valid for writes.
 */
enum DdvefStatus ddvef_history_read(const struct DdvefConfig *cfg,
                                    const char *path,
                                    struct DdvefHistory **out);

/**
 * Relative spatial 2-norm errors of `run` against `reference` in
 * temperature and total radiation energy, one value per time level.
 *
 * # Safety
 * `run` and `reference` must be live handles; `temperature` and `energy`
 * must each be valid for `len` writes.
 */
enum DdvefStatus ddvef_compare(const struct DdvefHistory *run,
                               const struct DdvefHistory *reference,
                               double *temperature,
                               double *energy,
                               size_t len);

/**
 * # Safety
 * `h` must be null or a handle not yet freed.
 */
void ddvef_history_free(struct DdvefHistory *h);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* DDVEF_H */
