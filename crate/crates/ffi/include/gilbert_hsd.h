#ifndef GILBERT_HSD_H
#define GILBERT_HSD_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum GhsdStatus {
  GHSD_STATUS_OK = 0,
  GHSD_STATUS_NULL_POINTER = 1,
  GHSD_STATUS_INVALID_ARGUMENT = 2,
  GHSD_STATUS_DIMENSION = 3,
  GHSD_STATUS_VALIDATION = 4,
  GHSD_STATUS_CAPACITY = 5,
  GHSD_STATUS_DEGENERATE = 6,
  GHSD_STATUS_IO = 7,
  GHSD_STATUS_FORMAT = 8,
  GHSD_STATUS_PANIC = 9,
} GhsdStatus;

/**
 * A Gilbert run together with every correction it has accepted.
 */
typedef struct GhsdRun GhsdRun;

/**
 * A validated density matrix.
 */
typedef struct GhsdState GhsdState;

/**
 * Stopping rules. Zero counts and a NaN target mean "not set".
 */
typedef struct GhsdHalt {
  uint64_t max_successes;
  uint64_t max_trials;
  double target_d2;
  uint64_t stall_trials;
} GhsdHalt;

typedef struct GhsdTraceRecord {
  uint64_t c_t;
  uint64_t c_s;
  double d2;
} GhsdTraceRecord;

typedef struct GhsdFitReport {
  double a;
  double b;
  double r;
  double f;
  double r2;
} GhsdFitReport;

typedef struct GhsdWitnessReport {
  double lambda;
  double value_rho0;
  double margin;
  bool entangled;
} GhsdWitnessReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or NULL. Valid until the
 * next call into the library from the same thread.
 */
const char *ghsd_last_error(void);

/**
 * # Safety
 * `s` must be NULL or a string returned by this library.
 */
void ghsd_string_free(char *s);

/**
 * Builds a named reference state such as `bell` or `ghz:3`.
 *
 * # Safety
 * `name` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GhsdStatus ghsd_state_named(const char *name, struct GhsdState **out);

/**
 * Parses a state file document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a valid pointer.
 */
enum GhsdStatus ghsd_state_from_json(const char *json, struct GhsdState **out);

/**
 * Serializes a state in the state file format. Free the result with
 * `ghsd_string_free`.
 *
 * # Safety
 * `state` must be a live handle and `out` a valid pointer.
 */
enum GhsdStatus ghsd_state_to_json(const struct GhsdState *state, char **out);

/**
 * Matrix dimension of the state, or 0 for NULL.
 *
 * # Safety
 * `state` must be NULL or a live handle.
 */
size_t ghsd_state_size(const struct GhsdState *state);

/**
 * Number of parties, or 0 for NULL.
 *
 * # Safety
 * `state` must be NULL or a live handle.
 */
size_t ghsd_state_num_parties(const struct GhsdState *state);

/**
 * Copies the subsystem dimensions into `dims`, which holds `len` entries.
 *
 * # Safety
 * `state` must be a live handle and `dims` point to `len` writable entries.
 */
enum GhsdStatus ghsd_state_dims(const struct GhsdState *state, size_t *dims, size_t len);

/**
 * # Safety
 * `state` must be NULL or a handle not yet freed.
 */
void ghsd_state_free(struct GhsdState *state);

/**
 * Squared Hilbert-Schmidt distance Tr(a - b)².
 *
 * # Safety
 * `a`, `b` must be live handles and `out` a valid pointer.
 */
enum GhsdStatus ghsd_hsd_sq(const struct GhsdState *a, const struct GhsdState *b, double *out);

/**
 * Starts a run on `rho0`. `init` may be NULL for the maximally mixed state.
 *
 * # Safety
 * `rho0` must be a live handle, `init` NULL or a live handle, `out` valid.
 */
enum GhsdStatus ghsd_run_new(const struct GhsdState *rho0,
                             const struct GhsdState *init,
                             uint64_t seed,
                             bool real_only,
                             bool box_muller,
                             struct GhsdRun **out);

/**
 * Continues the run until a halt rule fires. Counters are cumulative, so a
 * second call with the same limits returns immediately.
 *
 * # Safety
 * `run` must be a live handle and `halt` a valid pointer.
 */
enum GhsdStatus ghsd_run_execute(struct GhsdRun *run, const struct GhsdHalt *halt);

/**
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum GhsdStatus ghsd_run_d2(const struct GhsdRun *run, double *out);

/**
 * # Safety
 * `run` must be a live handle; `trials` and `successes` valid pointers.
 */
enum GhsdStatus ghsd_run_counters(const struct GhsdRun *run, uint64_t *trials, uint64_t *successes);

/**
 * Number of accepted corrections recorded, or 0 for NULL.
 *
 * # Safety
 * `run` must be NULL or a live handle.
 */
size_t ghsd_run_trace_len(const struct GhsdRun *run);

/**
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum GhsdStatus ghsd_run_trace_get(const struct GhsdRun *run,
                                   size_t index,
                                   struct GhsdTraceRecord *out);

/**
 * Copies the current separable iterate into a new state handle.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum GhsdStatus ghsd_run_rho1(const struct GhsdRun *run, struct GhsdState **out);

/**
 * Fits the distance limit and the power law on the recorded trace.
 *
 * # Safety
 * `run` must be a live handle and `out` a valid pointer.
 */
enum GhsdStatus ghsd_run_fit(const struct GhsdRun *run, uint64_t stride, struct GhsdFitReport *out);

/**
 * # Safety
 * `run` must be NULL or a handle not yet freed.
 */
void ghsd_run_free(struct GhsdRun *run);

/**
 * Witness W = (ρ₀ - ρ₁) - λI with λ from `restarts` alternating ascents.
 *
 * # Safety
 * `rho0`, `rho1` must be live handles and `out` a valid pointer.
 */
enum GhsdStatus ghsd_witness(const struct GhsdState *rho0,
                             const struct GhsdState *rho1,
                             size_t restarts,
                             uint64_t seed,
                             struct GhsdWitnessReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* GILBERT_HSD_H */
