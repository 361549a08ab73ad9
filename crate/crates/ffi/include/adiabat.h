#ifndef ADIABAT_H
#define ADIABAT_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum AdiabatConvention {
  ADIABAT_CONVENTION_SYMMETRIC = 0,
  ADIABAT_CONVENTION_LITERAL = 1,
} AdiabatConvention;

typedef enum AdiabatStatus {
  ADIABAT_STATUS_OK = 0,
  ADIABAT_STATUS_DOMAIN = 1,
  ADIABAT_STATUS_NUMERICAL = 2,
  ADIABAT_STATUS_CONFIG = 3,
  ADIABAT_STATUS_IO = 4,
  ADIABAT_STATUS_NULL_POINTER = 5,
  ADIABAT_STATUS_PANIC = 6,
} AdiabatStatus;

/**
 * Opaque handle: a half-filled chain together with its drive.
 */
typedef struct AdiabatChain AdiabatChain;

/**
 * Thresholds derived from an adiabatic-line gradient.
 */
typedef struct AdiabatThresholds {
  double gradient;
  double delta_rho;
  double delta_trace;
  double delta_n;
} AdiabatThresholds;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message of the last failed call on this thread, or null. The pointer is
 * valid until the next failing call on the same thread.
 */
const char *adiabat_last_error(void);

/**
 * Builds a half-filled chain of `n_sites` sites with interaction `u` (in J)
 * and the default ramp over `tau` (in 1/J). Release with
 * [`adiabat_chain_free`].
 *
 * # Safety
 * `out` must be a valid pointer to writable storage for one handle pointer.
 */
enum AdiabatStatus adiabat_chain_new(size_t n_sites,
                                     double u,
                                     double tau,
                                     enum AdiabatConvention convention,
                                     struct AdiabatChain **out);

/**
 * # Safety
 * `chain` must come from [`adiabat_chain_new`] and not be used afterwards.
 */
void adiabat_chain_free(struct AdiabatChain *chain);

/**
 * Sector dimension, or 0 for a null handle.
 *
 * # Safety
 * `chain` must be null or a live handle.
 */
size_t adiabat_chain_dim(const struct AdiabatChain *chain);

/**
 * Writes the lowest `len` eigenvalues of `H(t)` into `out`, ascending.
 *
 * # Safety
 * `chain` must be a live handle and `out` must hold `len` doubles.
 */
enum AdiabatStatus adiabat_chain_spectrum(const struct AdiabatChain *chain,
                                          double t,
                                          double *out,
                                          size_t len);

/**
 * Gradient of the adiabatic line at temperature `kt` (in J), from the
 * default dense fit.
 *
 * # Safety
 * `chain` must be a live handle and `gradient` writable.
 */
enum AdiabatStatus adiabat_chain_gradient(const struct AdiabatChain *chain,
                                          double kt,
                                          double *gradient);

/**
 * Finite-temperature adiabatic criterion at time `t`, with `s = 1` and no
 * cap on final levels.
 *
 * # Safety
 * `chain` must be a live handle and `epsilon` writable.
 */
enum AdiabatStatus adiabat_chain_epsilon(const struct AdiabatChain *chain,
                                         double t,
                                         double kt,
                                         double *epsilon);

/**
 * Evolves the reference state over `points` uniform output times and
 * writes `t / tau`, the Bures distance to the adiabatic reference, the
 * density distance, and epsilon. Each array must hold `points` doubles;
 * any of them may be null to skip it.
 *
 * # Safety
 * `chain` must be a live handle; non-null arrays must hold `points` doubles.
 */
enum AdiabatStatus adiabat_chain_diagnose(const struct AdiabatChain *chain,
                                          double kt,
                                          double gradient,
                                          size_t points,
                                          double *t_over_tau,
                                          double *d_bures,
                                          double *d_density,
                                          double *epsilon);

/**
 * # Safety
 * `out` must be writable.
 */
enum AdiabatStatus adiabat_thresholds(double gradient, struct AdiabatThresholds *out);

/**
 * Bures distance between two `dim x dim` density matrices.
 *
 * # Safety
 * `rho` and `sigma` must hold `2 * dim * dim` doubles; `out` must be writable.
 */
enum AdiabatStatus adiabat_bures_distance(const double *rho,
                                          const double *sigma,
                                          size_t dim,
                                          double *out);

/**
 * Trace distance between two `dim x dim` density matrices.
 *
 * # Safety
 * As [`adiabat_bures_distance`].
 */
enum AdiabatStatus adiabat_trace_distance(const double *rho,
                                          const double *sigma,
                                          size_t dim,
                                          double *out);

/**
 * Density distance between two site-occupation profiles of `n_sites`
 * entries holding `n_particles` particles.
 *
 * # Safety
 * `n1` and `n2` must hold `n_sites` doubles; `out` must be writable.
 */
enum AdiabatStatus adiabat_density_distance(const double *n1,
                                            const double *n2,
                                            size_t n_sites,
                                            size_t n_particles,
                                            double *out);

/**
 * Runs the scenario described by a TOML file and writes its output bundle.
 * `gradient` may be null.
 *
 * # Safety
 * `config_path` must be a nul-terminated UTF-8 path.
 */
enum AdiabatStatus adiabat_run_scenario(const char *config_path, double *gradient);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* ADIABAT_H */
