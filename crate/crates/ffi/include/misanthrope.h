#ifndef MISANTHROPE_H
#define MISANTHROPE_H

/* Generated by cbindgen from crates/ffi/src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

typedef enum MhStatus {
  MH_STATUS_OK = 0,
  MH_STATUS_NULL_POINTER = 1,
  MH_STATUS_INVALID_UTF8 = 2,
  MH_STATUS_INVALID_ARGUMENT = 3,
  MH_STATUS_MODEL = 4,
  MH_STATUS_EQUILIBRIUM = 5,
  MH_STATUS_SIMULATION = 6,
  MH_STATUS_BURGERS = 7,
  MH_STATUS_CONFIG = 8,
  MH_STATUS_PANIC = 9,
} MhStatus;

typedef struct MhFamily MhFamily;

typedef struct MhModel MhModel;

typedef struct MhSimulation MhSimulation;

/*
 Flux `Φ̂(v0)` and its first two derivatives.
 */
typedef struct MhFluxDerivatives {
  double a0;
  double b0;
  double c0;
} MhFluxDerivatives;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Message of the last failure on this thread, or null. The pointer stays
 valid until the next failing call on the same thread.
 */
const char *mh_last_error(void);

void mh_clear_error(void);

/*
 Library version as a static NUL-terminated string.
 */
const char *mh_version(void);

/*
 Totally asymmetric simple exclusion.

 # Safety
 `out` must be valid for writes.
 */
enum MhStatus mh_model_tasep(struct MhModel **out);

/*
 Exclusion with at most `k` units per site and `α(x) = x`.

 # Safety
 `out` must be valid for writes.
 */
enum MhStatus mh_model_k_exclusion(int64_t k, struct MhModel **out);

/*
 Zero-range with `r(x) = x`.

 # Safety
 `out` must be valid for writes.
 */
enum MhStatus mh_model_zero_range_linear(struct MhModel **out);

/*
 Bricklayers with `r(x) = x` on the positive side.

 # Safety
 `out` must be valid for writes.
 */
enum MhStatus mh_model_bricklayers_linear(struct MhModel **out);

/*
 Model from the `[model]` table of a run configuration given as TOML text.

 # Safety
 `toml` must be a NUL-terminated string and `out` valid for writes.
 */
enum MhStatus mh_model_from_toml(const char *toml, struct MhModel **out);

/*
 Checks the structural conditions on `[-window, window]` (clipped to the
 spin range). `passed` receives whether every required check holds.

 # Safety
 `model` must come from a model constructor; `passed` must be valid for writes.
 */
enum MhStatus mh_model_validate(const struct MhModel *model, int64_t window, bool *passed);

/*
 Rate of one unit moving from a site holding `x` to a neighbour holding `y`.

 # Safety
 `model` must come from a model constructor; `out` must be valid for writes.
 */
enum MhStatus mh_model_rate(const struct MhModel *model, int64_t x, int64_t y, double *out);

/*
 # Safety
 `model` must be null or come from a model constructor, and not be used afterwards.
 */
void mh_model_free(struct MhModel *model);

/*
 Stationary product family of `model`.

 # Safety
 `model` must come from a model constructor; `out` must be valid for writes.
 */
enum MhStatus mh_family_new(const struct MhModel *model, struct MhFamily **out);

/*
 Attainable densities `(lo, hi)`.

 # Safety
 `family` must come from [`mh_family_new`]; `lo` and `hi` must be valid for writes.
 */
enum MhStatus mh_family_density_range(const struct MhFamily *family, double *lo, double *hi);

/*
 Tilt with mean `v`.

 # Safety
 `family` must come from [`mh_family_new`]; `out` must be valid for writes.
 */
enum MhStatus mh_family_theta_of_v(const struct MhFamily *family, double v, double *out);

/*
 Mean of the family at tilt `theta`.

 # Safety
 `family` must come from [`mh_family_new`]; `out` must be valid for writes.
 */
enum MhStatus mh_family_density(const struct MhFamily *family, double theta, double *out);

/*
 Equilibrium flux at density `v`.

 # Safety
 `family` must come from [`mh_family_new`]; `out` must be valid for writes.
 */
enum MhStatus mh_family_flux_hat(const struct MhFamily *family, double v, double *out);

/*
 # Safety
 `family` must come from [`mh_family_new`]; `out` must be valid for writes.
 */
enum MhStatus mh_family_flux_derivatives(const struct MhFamily *family,
                                         double v0,
                                         struct MhFluxDerivatives *out);

/*
 # Safety
 `family` must be null or come from [`mh_family_new`], and not be used afterwards.
 */
void mh_family_free(struct MhFamily *family);

/*
 First shock time of Burgers' equation `u_t + c0 u u_x = 0` from
 `u0(x) = Σ_m sin[m-1] sin(2πmx) + cos[m-1] cos(2πmx)`; `+inf` if none.
 Either coefficient array may be null.

 # Safety
 Non-null `sin` and `cos` must point to `modes` doubles; `out` must be valid for writes.
 */
enum MhStatus mh_shock_time(const double *sin,
                            const double *cos,
                            uintptr_t modes,
                            double c0,
                            double *out);

/*
 Simulation on a ring starting from `spins[0..n]`.

 # Safety
 `model` must come from a model constructor, `spins` must point to `n`
 values and `out` must be valid for writes.
 */
enum MhStatus mh_simulation_new(const struct MhModel *model,
                                const int64_t *spins,
                                uintptr_t n,
                                uint64_t seed,
                                struct MhSimulation **out);

/*
 Simulation on `n` sites started from the product measure with density
 `v0 + n^{-beta} amplitude sin(2πx)`.

 # Safety
 `family` must come from [`mh_family_new`]; `out` must be valid for writes.
 */
enum MhStatus mh_simulation_sample(const struct MhFamily *family,
                                   uintptr_t n,
                                   double v0,
                                   double amplitude,
                                   double beta,
                                   uint64_t seed,
                                   struct MhSimulation **out);

/*
 Advances to micro-time `target`.

 # Safety
 `sim` must come from a simulation constructor.
 */
enum MhStatus mh_simulation_run_until(struct MhSimulation *sim, double target);

/*
 Number of sites.

 # Safety
 `sim` must come from a simulation constructor; `out` must be valid for writes.
 */
enum MhStatus mh_simulation_len(const struct MhSimulation *sim, uintptr_t *out);

/*
 Copies the current spins into `buf`, which must hold `len` values with
 `len` equal to the number of sites.

 # Safety
 `sim` must come from a simulation constructor; `buf` must be valid for `len` writes.
 */
enum MhStatus mh_simulation_spins(const struct MhSimulation *sim, int64_t *buf, uintptr_t len);

/*
 # Safety
 `sim` must come from a simulation constructor; `out` must be valid for writes.
 */
enum MhStatus mh_simulation_time(const struct MhSimulation *sim, double *out);

/*
 Jumps performed so far.

 # Safety
 `sim` must come from a simulation constructor; `out` must be valid for writes.
 */
enum MhStatus mh_simulation_events(const struct MhSimulation *sim, uint64_t *out);

/*
 # Safety
 `sim` must be null or come from a simulation constructor, and not be used afterwards.
 */
void mh_simulation_free(struct MhSimulation *sim);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MISANTHROPE_H */
