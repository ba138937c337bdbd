#ifndef MAPBER_H
#define MAPBER_H

#include <stddef.h>
#include <stdint.h>

typedef enum MapberDetector {
  MAPBER_DETECTOR_MAP = 0,
  MAPBER_DETECTOR_BRO = 1,
  MAPBER_DETECTOR_MF_GENIE = 2,
} MapberDetector;

typedef enum MapberRegime {
  MAPBER_REGIME_UNIQUE_CRITICAL = 0,
  MAPBER_REGIME_THREE_CRITICAL = 1,
} MapberRegime;

/*
 Result codes. Zero is success.
 */
typedef enum MapberStatus {
  MAPBER_STATUS_OK = 0,
  MAPBER_STATUS_NULL_POINTER = 1,
  MAPBER_STATUS_DOMAIN = 2,
  MAPBER_STATUS_PARAMETER = 3,
  MAPBER_STATUS_EVALUATION = 4,
  MAPBER_STATUS_BUDGET = 5,
  MAPBER_STATUS_DEGENERATE_TANGENCY = 6,
  MAPBER_STATUS_INFEASIBLE = 7,
  MAPBER_STATUS_NON_CONVERGENCE = 8,
  MAPBER_STATUS_DIVERGENCE = 9,
  MAPBER_STATUS_INTERNAL = 10,
  MAPBER_STATUS_PANIC = 11,
} MapberStatus;

/*
 Opaque bundle of the analytic quantities for one model.
 */
typedef struct MapberBounds MapberBounds;

/*
 Opaque model parameters `(delta, sigma^2)`.
 */
typedef struct MapberModel MapberModel;

/*
 Plain view of a [`MapberBounds`].
 */
typedef struct MapberBoundValues {
  double theta0;
  double tau0;
  double theta_star;
  double mfb;
  size_t critical_point_count;
} MapberBoundValues;

/*
 Converged replica state at finite `B`.
 */
typedef struct MapberTanakaResult {
  double overlap_m;
  double q;
  double field_mean;
  double field_var;
  double b;
  double ber;
  size_t iterations;
  size_t clamp_events;
} MapberTanakaResult;

typedef struct MapberSimReport {
  size_t n;
  uint64_t trials;
  uint64_t bit_errors;
  uint64_t bits_total;
  double ber_hat;
  double ci_lo;
  double ci_hi;
  uint64_t non_converged;
} MapberSimReport;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/*
 Copies the last error message of this thread into `buf` (NUL-terminated,
 truncated to `len`). Returns the full message length without the NUL,
 or 0 if there is none.

 # Safety
 `buf` must be valid for `len` bytes or null.
 */
size_t mapber_last_error_message(char *buf, size_t len);

/*
 Static version string.
 */
const char *mapber_version(void);

/*
 # Safety
 `out` must be valid for a write.
 */
enum MapberStatus mapber_phi(double x, double *out);

/*
 # Safety
 `out` must be valid for a write.
 */
enum MapberStatus mapber_q_tail(double x, double *out);

/*
 # Safety
 `out` must be valid for a write.
 */
enum MapberStatus mapber_q_inv(double p, double *out);

/*
 Creates a model from `delta = m/n` and the noise variance.

 # Safety
 `out` must be valid for a write. Free the handle with
 [`mapber_model_free`].
 */
enum MapberStatus mapber_model_new(double delta, double sigma2, struct MapberModel **out);

/*
 Creates a model from `delta` and the SNR in dB.

 # Safety
 As [`mapber_model_new`].
 */
enum MapberStatus mapber_model_from_snr_db(double delta, double snr_db, struct MapberModel **out);

/*
 # Safety
 `m` must come from a model constructor and not be used afterwards. Null
 is accepted.
 */
void mapber_model_free(struct MapberModel *m);

/*
 # Safety
 `m` must be a live model handle and the out-pointers valid for writes.
 */
enum MapberStatus mapber_model_params(const struct MapberModel *m, double *delta, double *sigma2);

/*
 `ell(theta)` for `theta` in `(0, 1)`.

 # Safety
 `m` must be a live model handle and `out` valid for a write.
 */
enum MapberStatus mapber_ell(const struct MapberModel *m, double theta, double *out);

/*
 Derivative of `ell` at `theta`.

 # Safety
 `m` must be a live model handle and `out` valid for a write.
 */
enum MapberStatus mapber_ell_prime(const struct MapberModel *m, double theta, double *out);

/*
 Upper bound `theta0` on the MAP bit error rate.

 # Safety
 `m` must be a live model handle and `out` valid for a write.
 */
enum MapberStatus mapber_theta0(const struct MapberModel *m, double *out);

/*
 Threshold `tau0` with `Q(tau0) = theta0`.

 # Safety
 `m` must be a live model handle and `out` valid for a write.
 */
enum MapberStatus mapber_tau0(const struct MapberModel *m, double *out);

/*
 Replica prediction of the MAP bit error rate.

 # Safety
 `m` must be a live model handle and `out` valid for a write.
 */
enum MapberStatus mapber_theta_star(const struct MapberModel *m, double *out);

/*
 Matched-filter bound.

 # Safety
 `m` must be a live model handle and `out` valid for a write.
 */
enum MapberStatus mapber_mfb(const struct MapberModel *m, double *out);

/*
 Whether `ell` has one or three critical points.

 # Safety
 `m` must be a live model handle and `out` valid for a write.
 */
enum MapberStatus mapber_regime(const struct MapberModel *m, enum MapberRegime *out);

/*
 Computes every analytic quantity for a model.

 # Safety
 `m` must be a live model handle and `out` valid for a write. Free the
 result with [`mapber_bounds_free`].
 */
enum MapberStatus mapber_bounds_compute(const struct MapberModel *m, struct MapberBounds **out);

/*
 # Safety
 `b` must be a live bounds handle and `out` valid for a write.
 */
enum MapberStatus mapber_bounds_values(const struct MapberBounds *b, struct MapberBoundValues *out);

/*
 # Safety
 `b` must come from [`mapber_bounds_compute`] and not be used afterwards.
 Null is accepted.
 */
void mapber_bounds_free(struct MapberBounds *b);

/*
 Solves the finite-`B` replica system from its default starting point.

 # Safety
 `m` must be a live model handle and `out` valid for a write.
 */
enum MapberStatus mapber_tanaka_solve(const struct MapberModel *m,
                                      double b,
                                      double damping,
                                      size_t max_iters,
                                      struct MapberTanakaResult *out);

/*
 Monte Carlo bit error rate over `trials` seeded instances of size `n`.

 # Safety
 `m` must be a live model handle and `out` valid for a write.
 */
enum MapberStatus mapber_simulate(const struct MapberModel *m,
                                  enum MapberDetector detector,
                                  size_t n,
                                  uint64_t trials,
                                  uint64_t seed,
                                  struct MapberSimReport *out);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* MAPBER_H */
