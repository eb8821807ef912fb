#ifndef SIGMALAB_H
#define SIGMALAB_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Status codes returned by every fallible call.
 */
typedef enum SlStatus {
  SL_STATUS_OK = 0,
  SL_STATUS_NULL_POINTER = 1,
  SL_STATUS_INVALID_UTF8 = 2,
  SL_STATUS_CONFIG = 3,
  SL_STATUS_EXCESS_CENSORING = 4,
  SL_STATUS_NUMERICAL = 5,
  SL_STATUS_IO = 6,
  SL_STATUS_PANIC = 7,
} SlStatus;

/**
 * Opaque measure handle.
 */
typedef struct SlMeasure SlMeasure;

/**
 * Opaque scenario handle.
 */
typedef struct SlScenario SlScenario;

/**
 * Verdict of a scenario run.
 */
typedef struct SlSummary {
  uint64_t n;
  uint64_t censored;
  double ks;
  double dkw_eps;
  double slack;
  bool pass;
} SlSummary;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated,
 * truncated to `len`) and returns the full message length in bytes.
 *
 * # Safety
 * `buf` must be null or valid for `len` bytes.
 */
size_t sl_last_error_message(char *buf, size_t len);

/**
 * Library version as a static NUL-terminated string.
 */
const char *sl_version(void);

/**
 * Parses and validates a scenario document.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid for writes.
 */
enum SlStatus sl_scenario_from_json(const char *json, struct SlScenario **out);

/**
 * Overrides the number of paths.
 *
 * # Safety
 * `s` must be a live scenario handle.
 */
enum SlStatus sl_scenario_set_paths(struct SlScenario *s, uint64_t n_paths);

/**
 * Overrides the seed.
 *
 * # Safety
 * `s` must be a live scenario handle.
 */
enum SlStatus sl_scenario_set_seed(struct SlScenario *s, uint64_t seed);

/**
 * Runs the scenario and writes its verdict.
 *
 * # Safety
 * `s` must be a live scenario handle and `out` valid for writes.
 */
enum SlStatus sl_scenario_run(const struct SlScenario *s, struct SlSummary *out);

/**
 * Releases a scenario handle; null is ignored.
 *
 * # Safety
 * `s` must be null or a handle not yet freed.
 */
void sl_scenario_free(struct SlScenario *s);

/**
 * Exponential law with the given rate.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SlStatus sl_measure_exponential(double rate, struct SlMeasure **out);

/**
 * Uniform law on `[0, b]`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SlStatus sl_measure_uniform(double b, struct SlMeasure **out);

/**
 * Measure from a JSON description such as `{"kind": "lomax", "alpha": 2}`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` valid for writes.
 */
enum SlStatus sl_measure_from_json(const char *json, struct SlMeasure **out);

/**
 * `P(V > x)`.
 *
 * # Safety
 * `m` must be a live measure handle and `out` valid for writes.
 */
enum SlStatus sl_measure_survival(const struct SlMeasure *m, double x, double *out);

/**
 * The transform `ψ(x) = ∫_{[0,x]} z / P(V ≥ z) dP(z)`.
 *
 * # Safety
 * `m` must be a live measure handle and `out` valid for writes.
 */
enum SlStatus sl_measure_dual_hl_psi(const struct SlMeasure *m, double x, double *out);

/**
 * The embedding barrier `φ`, the right inverse of `ψ`.
 *
 * # Safety
 * `m` must be a live measure handle and `out` valid for writes.
 */
enum SlStatus sl_measure_dual_hl_phi(const struct SlMeasure *m, double z, double *out);

/**
 * Releases a measure handle; null is ignored.
 *
 * # Safety
 * `m` must be null or a handle not yet freed.
 */
void sl_measure_free(struct SlMeasure *m);

/**
 * `c_{p,q} = B(1/q, 1/p - 1/q) / q` for `q > p > 0`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SlStatus sl_spq_constant(double p, double q, double *out);

/**
 * `P(S_∞ > a) = (x0 / a) ∧ 1`.
 *
 * # Safety
 * `out` must be valid for writes.
 */
enum SlStatus sl_doob_maximal_survival(double x0, double a, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* SIGMALAB_H */
