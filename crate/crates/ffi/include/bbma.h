#ifndef BBMA_H
#define BBMA_H

/* Generated by cbindgen from crates/ffi/src/lib.rs. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * `solver` argument of [`bbma_steerer_new`].
 */
#define BBMA_SOLVER_EXPLICIT_INVERSE 0

#define BBMA_SOLVER_ORTHOGONAL_FACTORIZATION 1

enum BbmaStatus
#if defined(__cplusplus) || __STDC_VERSION__ >= 202311L
  : int32_t
#endif // defined(__cplusplus) || __STDC_VERSION__ >= 202311L
 {
  BBMA_STATUS_OK = 0,
  BBMA_STATUS_NULL_POINTER = 1,
  BBMA_STATUS_INVALID_ARGUMENT = 2,
  BBMA_STATUS_DIMENSION_MISMATCH = 3,
  BBMA_STATUS_RANK_DEFICIENT = 4,
  BBMA_STATUS_ILL_CONDITIONED = 5,
  BBMA_STATUS_SINGULAR = 6,
  BBMA_STATUS_INTERNAL = 7,
};
#ifndef __cplusplus
#if __STDC_VERSION__ >= 202311L
typedef enum BbmaStatus BbmaStatus;
#else
typedef int32_t BbmaStatus;
#endif // __STDC_VERSION__ >= 202311L
#endif // __cplusplus

/**
 * Class membership tracked across symbol-times.
 */
typedef struct BbmaScheduler BbmaScheduler;

/**
 * Prepared null-steering weights for one drop.
 */
typedef struct BbmaSteerer BbmaSteerer;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * Valid until the next call on the same thread.
 */
const char *bbma_last_error(void);

/**
 * Library name and version, static storage.
 */
const char *bbma_version(void);

/**
 * Builds a steerer for `n_terminals` ground positions (`x, y, z` triples
 * in metres, access point at `(0, 0, ap_height_m)`) seen by an `nx` by `ny`
 * array with `spacing_wavelengths` element spacing.
 */
BbmaStatus bbma_steerer_new(size_t nx,
                            size_t ny,
                            double spacing_wavelengths,
                            double ap_height_m,
                            const double *positions_xyz,
                            size_t n_terminals,
                            int32_t solver,
                            double condition_ceiling,
                            struct BbmaSteerer **out);

void bbma_steerer_free(struct BbmaSteerer *steerer);

size_t bbma_steerer_antennas(const struct BbmaSteerer *steerer);

/**
 * κ₂(AᴴA) of the steerer's steering matrix.
 */
BbmaStatus bbma_steerer_condition_number(const struct BbmaSteerer *steerer, double *out);

/**
 * Weights with unit response at terminals whose `selector` byte is
 * non-zero and nulls at the rest. Writes `antennas` real and imaginary
 * parts.
 */
BbmaStatus bbma_steerer_weights(const struct BbmaSteerer *steerer,
                                const uint8_t *selector,
                                size_t n_terminals,
                                double *out_re,
                                double *out_im,
                                size_t antennas);

/**
 * `membership[i]` is terminal i's class in `0..order`. Classes start bound
 * to the symbol with the same index.
 */
BbmaStatus bbma_scheduler_new(const size_t *membership,
                              size_t n_terminals,
                              size_t order,
                              struct BbmaScheduler **out);

void bbma_scheduler_free(struct BbmaScheduler *scheduler);

/**
 * Serves `demand` (each terminal's next symbol) and updates the state.
 * Non-zero `dynamic` rebinds classes to symbols to minimize moves; zero
 * keeps the current binding. Writes the number of moved terminals.
 */
BbmaStatus bbma_scheduler_step(struct BbmaScheduler *scheduler,
                               const size_t *demand,
                               size_t n_terminals,
                               int32_t dynamic,
                               size_t *out_moves);

/**
 * Copies each terminal's class.
 */
BbmaStatus bbma_scheduler_membership(const struct BbmaScheduler *scheduler,
                                     size_t *out,
                                     size_t n_terminals);

/**
 * Copies the symbol each class currently carries.
 */
BbmaStatus bbma_scheduler_symbol_of_class(const struct BbmaScheduler *scheduler,
                                          size_t *out,
                                          size_t order);

/**
 * Total power in watts for per-terminal allocation hitting
 * `target_sinr_linear` on every link with perfectly orthogonal channels.
 */
BbmaStatus bbma_conventional_power(const double *gains_linear,
                                   size_t n_terminals,
                                   double target_sinr_linear,
                                   double noise_w,
                                   double *out_total_w);

/**
 * Thermal noise power in watts over `bandwidth_hz` behind a receiver with
 * the given noise figure.
 */
double bbma_noise_power_w(double bandwidth_hz, double noise_figure_db);

/**
 * Symbol error probability of M-PSK at the given Es/N0 (linear).
 */
BbmaStatus bbma_mpsk_ser(uint64_t order, double es_n0, double *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* BBMA_H */
