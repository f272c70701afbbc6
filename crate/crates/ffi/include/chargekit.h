#ifndef CHARGEKIT_H
#define CHARGEKIT_H

#pragma once

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result code of every fallible call. `CK_STATUS_OK` is zero.
 */
typedef enum CkStatus {
  CK_STATUS_OK = 0,
  CK_STATUS_NULL_POINTER = 1,
  CK_STATUS_PANIC = 2,
  CK_STATUS_DUPLICATE_POSITION = 10,
  CK_STATUS_ZERO_CHARGE = 11,
  CK_STATUS_DIMENSION_MISMATCH = 12,
  CK_STATUS_INVALID_INPUT = 13,
  CK_STATUS_EVALUATION_ON_CHARGE = 14,
  CK_STATUS_OVERLAPPING_SPHERES = 15,
  CK_STATUS_UNSUPPORTED_DIMENSION = 16,
  CK_STATUS_SINGLE_CHARGE = 17,
  CK_STATUS_NON_UNIT_CHARGE = 18,
  CK_STATUS_SINGULAR_JACOBIAN = 20,
  CK_STATUS_NO_CONVERGENCE = 21,
  CK_STATUS_DEGENERATE_SYSTEM = 22,
  CK_STATUS_POINT_TOO_CLOSE = 23,
  CK_STATUS_NOT_CRITICAL = 24,
  CK_STATUS_SEED_NOT_DEGENERATE = 25,
  CK_STATUS_CORRECTOR_DIVERGED = 26,
  CK_STATUS_NO_CROSSING = 27,
  CK_STATUS_NO_POSITIVE_SUPPORT = 28,
  CK_STATUS_PRECONDITION = 29,
} CkStatus;

/**
 * Pairwise interaction law selector.
 */
typedef enum CkLaw {
  /**
   * `-ln r`.
   */
  CK_LAW_LOG = 0,
  /**
   * The Newtonian kernel of the configuration's dimension.
   */
  CK_LAW_NEWTONIAN = 1,
  /**
   * `r^-k` with the exponent passed alongside.
   */
  CK_LAW_RIESZ = 2,
} CkLaw;

/**
 * Opaque charge configuration.
 */
typedef struct CkConfig CkConfig;

/**
 * Both sides of the Onsager inequality.
 */
typedef struct CkOnsager {
  double lhs;
  double rhs;
  double margin;
} CkOnsager;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *ck_version(void);

/**
 * Copies the last error message of this thread into `buf` (truncated,
 * always NUL-terminated when `len > 0`). Returns the full message length
 * excluding the terminator, or 0 when there is no error.
 *
 * # Safety
 * `buf` must be valid for `len` bytes or null.
 */
size_t ck_last_error_message(char *buf, size_t len);

/**
 * Builds a configuration from `n` charges; `positions` holds `n * dimension`
 * coordinates, charge-major.
 *
 * # Safety
 * `positions` and `charges` must be valid for the stated lengths; `out`
 * must be writable.
 */
enum CkStatus ck_config_new(size_t dimension,
                            size_t n,
                            const double *positions,
                            const double *charges,
                            struct CkConfig **out);

/**
 * Releases a handle; null is a no-op.
 *
 * # Safety
 * `cfg` must come from this library and not be used afterwards.
 */
void ck_config_free(struct CkConfig *cfg);

/**
 * Number of charges, 0 for null.
 *
 * # Safety
 * `cfg` must be a live handle or null.
 */
size_t ck_config_len(const struct CkConfig *cfg);

/**
 * Ambient dimension, 0 for null.
 *
 * # Safety
 * `cfg` must be a live handle or null.
 */
size_t ck_config_dimension(const struct CkConfig *cfg);

/**
 * Copies positions (`len * dimension` values) and charges (`len` values)
 * out of a handle. Either output may be null to skip it.
 *
 * # Safety
 * Non-null outputs must be valid for the sizes above.
 */
enum CkStatus ck_config_get(const struct CkConfig *cfg, double *positions, double *charges);

/**
 * Potential `sum q_i K(|x - x_i|)` at `x` (`dimension` values).
 *
 * # Safety
 * `x` must hold `dimension` values; `out` must be writable.
 */
enum CkStatus ck_potential(const struct CkConfig *cfg,
                           bool normalized,
                           const double *x,
                           double *out);

/**
 * Gradient of the potential at `x`, written to `out` (`dimension` values).
 *
 * # Safety
 * `x` and `out` must hold `dimension` values.
 */
enum CkStatus ck_gradient(const struct CkConfig *cfg,
                          bool normalized,
                          const double *x,
                          double *out);

/**
 * Hessian of the potential at `x`, row-major into `out`
 * (`dimension * dimension` values).
 *
 * # Safety
 * `x` must hold `dimension` values and `out` `dimension^2`.
 */
enum CkStatus ck_hessian(const struct CkConfig *cfg, bool normalized, const double *x, double *out);

/**
 * Pairwise energy over ordered pairs, `sum_{i != j} q_i q_j Phi(r_ij)`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CkStatus ck_energy(const struct CkConfig *cfg, enum CkLaw kind, double riesz_k, double *out);

/**
 * Both sides of the Onsager inequality (dimension >= 3).
 *
 * # Safety
 * `out` must be writable.
 */
enum CkStatus ck_onsager(const struct CkConfig *cfg, struct CkOnsager *out);

/**
 * Largest net-force norm over all charges under the given law.
 *
 * # Safety
 * `out` must be writable.
 */
enum CkStatus ck_equilibrium_residual(const struct CkConfig *cfg,
                                      enum CkLaw kind,
                                      double riesz_k,
                                      double *out);

/**
 * Damped Newton towards an equilibrium; the converged configuration is
 * returned as a new handle. Non-convergence yields `CK_STATUS_NO_CONVERGENCE`.
 *
 * # Safety
 * `out` must be writable.
 */
enum CkStatus ck_equilibrium_solve(const struct CkConfig *cfg,
                                   enum CkLaw kind,
                                   double riesz_k,
                                   struct CkConfig **out);

/**
 * Planar log-law equilibrium: `n - 1` charges `q` on the unit circle
 * and a balancing charge at the origin.
 *
 * # Safety
 * `out` must be writable.
 */
enum CkStatus ck_construct_gon(size_t n, double q, struct CkConfig **out);

/**
 * `|sum q_i^2 - (sum q_i)^2|` for
 * `n` charges; NaN when `charges` is null and `n > 0`.
 *
 * # Safety
 * `charges` must hold `n` values.
 */
double ck_abanov_residual(const double *charges, size_t n);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CHARGEKIT_H */
