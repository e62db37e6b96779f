#ifndef NUSEST_H
#define NUSEST_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes.
 */
typedef enum NusestStatus {
  NUSEST_STATUS_OK = 0,
  NUSEST_STATUS_NULL_POINTER = 1,
  NUSEST_STATUS_INVALID_ARGUMENT = 2,
  NUSEST_STATUS_DUPLICATE_ABSCISSA = 3,
  NUSEST_STATUS_SINGULAR_SYSTEM = 4,
  NUSEST_STATUS_LENGTH_MISMATCH = 5,
  NUSEST_STATUS_INTERNAL = 99,
} NusestStatus;

/**
 * Opaque estimator design.
 */
typedef struct NusestDesign NusestDesign;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failure on this thread, or NULL if none. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *nusest_last_error(void);

/**
 * Normalised sinc, `sin(pi x) / (pi x)`.
 */
double nusest_sinc(double x);

/**
 * Builds a design for `n` abscissas with regularisation `mu >= 0`.
 *
 * # Safety
 * `abscissas` must point to `n` readable doubles and `out` to writable storage
 * for one pointer.
 */
enum NusestStatus nusest_design_new(const double *abscissas,
                                    size_t n,
                                    double mu,
                                    struct NusestDesign **out);

/**
 * Releases a design. NULL is ignored.
 *
 * # Safety
 * `design` must come from [`nusest_design_new`] and not have been freed.
 */
void nusest_design_free(struct NusestDesign *design);

/**
 * Number of abscissas, or 0 for NULL.
 *
 * # Safety
 * `design` must be NULL or a live handle.
 */
size_t nusest_design_len(const struct NusestDesign *design);

/**
 * Ridge actually added to the Gram diagonal (`mu`, or the fallback).
 *
 * # Safety
 * `design` must be a live handle and `out` writable.
 */
enum NusestStatus nusest_design_ridge(const struct NusestDesign *design, double *out);

/**
 * Writes the `len` real coefficients `c(x)`.
 *
 * # Safety
 * `design` must be a live handle and `out` must hold `len` doubles.
 */
enum NusestStatus nusest_design_coefficients(const struct NusestDesign *design,
                                             double x,
                                             double *out,
                                             size_t len);

/**
 * Estimates `s(x)` from complex samples given as `len` interleaved
 * `(re, im)` pairs, writing the result to `out[0]` (re) and `out[1]` (im).
 *
 * # Safety
 * `samples` must hold `2 * len` doubles and `out` two doubles.
 */
enum NusestStatus nusest_design_estimate(const struct NusestDesign *design,
                                         const double *samples,
                                         size_t len,
                                         double x,
                                         double *out);

/**
 * Squared-error bound `A^2 (1 - g(x)^T (G + mu I)^{-1} g(x))`.
 *
 * # Safety
 * `design` must be a live handle and `out` writable.
 */
enum NusestStatus nusest_design_error_bound(const struct NusestDesign *design,
                                            double amplitude_bound,
                                            double x,
                                            double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* NUSEST_H */
