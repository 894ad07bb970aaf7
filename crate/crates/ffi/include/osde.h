#ifndef OSDE_H
#define OSDE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum OsdeStatus {
  OSDE_STATUS_OK = 0,
  OSDE_STATUS_NULL_POINTER = 1,
  OSDE_STATUS_INVALID_ARGUMENT = 2,
  OSDE_STATUS_DOMAIN = 3,
  OSDE_STATUS_DEGENERATE = 4,
  OSDE_STATUS_PARSE = 5,
  OSDE_STATUS_PROJECTION = 6,
  OSDE_STATUS_INDEX = 7,
  OSDE_STATUS_INTERNAL = 99,
} OsdeStatus;

typedef enum OsdeMethod {
  OSDE_METHOD_TRUNCATED = 0,
  OSDE_METHOD_SMOOTHED = 1,
  OSDE_METHOD_IID_BASELINE = 2,
} OsdeMethod;

/**
 * Opaque fitted and projected estimate.
 */
typedef struct OsdeEstimate OsdeEstimate;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Fits an estimate to `n` observations `x` with sampling weights `w`.
 *
 * `w` may be null, meaning every weight is `population_size / n`. A NaN
 * `delta` selects `-1/n`. `margin` widens the fitted range on both sides as
 * a fraction of the data range.
 *
 * # Safety
 * `x` (and `w` when not null) must point to `n` readable doubles and `out`
 * to a writable handle pointer.
 */
enum OsdeStatus osde_fit(const double *x,
                         const double *w,
                         size_t n,
                         size_t population_size,
                         double delta,
                         enum OsdeMethod method,
                         double margin,
                         struct OsdeEstimate **out);

/**
 * Loads an estimate from its JSON export.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` a writable pointer.
 */
enum OsdeStatus osde_estimate_from_json(const char *json, struct OsdeEstimate **out);

/**
 * Serializes the estimate (coefficients only) to JSON. Release the result
 * with [`osde_string_free`].
 *
 * # Safety
 * `est` must be a live handle and `out` a writable pointer.
 */
enum OsdeStatus osde_estimate_to_json(const struct OsdeEstimate *est, char **out);

/**
 * Projected density at scaled point `u` in `[0, 1]`.
 *
 * # Safety
 * `est` must be a live handle and `out` a writable double.
 */
enum OsdeStatus osde_estimate_eval(const struct OsdeEstimate *est, double u, double *out);

/**
 * Projected density on the original scale; zero outside the fitted range.
 *
 * # Safety
 * `est` must be a live handle and `out` a writable double.
 */
enum OsdeStatus osde_estimate_eval_x(const struct OsdeEstimate *est, double x, double *out);

/**
 * Unprojected series value at `u` (may be negative).
 *
 * # Safety
 * `est` must be a live handle and `out` a writable double.
 */
enum OsdeStatus osde_estimate_eval_raw(const struct OsdeEstimate *est, double u, double *out);

/**
 * Square root of the plug-in design variance at `u`.
 *
 * # Safety
 * `est` must be a live handle and `out` a writable double.
 */
enum OsdeStatus osde_estimate_design_sd(const struct OsdeEstimate *est, double u, double *out);

/**
 * Fills `values[i]` with the projected density at `i / (grid - 1)`.
 *
 * # Safety
 * `est` must be a live handle and `values` must hold `grid` doubles.
 */
enum OsdeStatus osde_estimate_grid(const struct OsdeEstimate *est, size_t grid, double *values);

/**
 * Truncation point `J`, or 0 for a null handle.
 *
 * # Safety
 * `est` must be null or a live handle.
 */
size_t osde_estimate_cutoff(const struct OsdeEstimate *est);

/**
 * Projection constant `c`, or NaN for a null handle.
 *
 * # Safety
 * `est` must be null or a live handle.
 */
double osde_estimate_shift(const struct OsdeEstimate *est);

/**
 * # Safety
 * `est` must be null or a handle from this library not yet freed.
 */
void osde_estimate_free(struct OsdeEstimate *est);

/**
 * # Safety
 * `s` must be null or a string returned by this library not yet freed.
 */
void osde_string_free(char *s);

/**
 * Message for the last failed call on this thread (empty after success).
 * Valid until the next library call on the same thread.
 */
const char *osde_last_error_message(void);

/**
 * Basis function `phi_j(u)`.
 *
 * # Safety
 * `out` must be a writable double.
 */
enum OsdeStatus osde_phi(size_t j, double u, double *out);

/**
 * Minimax MISE lower bound `P(k, Q, b) N^(-2k/(2k+1))`.
 *
 * # Safety
 * `out` must be a writable double.
 */
enum OsdeStatus osde_minimax_lower_bound(double k,
                                         double q,
                                         double b,
                                         uint64_t population_size,
                                         double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* OSDE_H */
