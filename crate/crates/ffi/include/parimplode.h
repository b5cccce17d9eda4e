#ifndef PARIMPLODE_H
#define PARIMPLODE_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum {
  PI_STATUS_OK = 0,
  PI_STATUS_NULL_POINTER = 1,
  PI_STATUS_INVALID_SPEC = 2,
  PI_STATUS_INVALID_UTF8 = 3,
  PI_STATUS_OUT_OF_RANGE = 4,
  PI_STATUS_POLE_PROXIMITY = 5,
  PI_STATUS_DEGENERATE_MAP = 6,
  PI_STATUS_DEGENERATE_NORMALIZATION = 7,
  PI_STATUS_ALL_POINTS_SKIPPED = 8,
  PI_STATUS_OVERFLOW = 9,
  PI_STATUS_SCHEDULE_MISMATCH = 10,
  PI_STATUS_IDENTITY_VIOLATION = 11,
  PI_STATUS_ORACLE_MISMATCH = 12,
  PI_STATUS_NON_POSITIVE_VALUE = 13,
  PI_STATUS_PANIC = 99,
} PiStatus;

typedef struct PiSchedule PiSchedule;

typedef struct PiSequences PiSequences;

typedef struct PiTriple PiTriple;

typedef struct {
  double re;
  double im;
} PiComplex;

/**
 * `z -> (a z + b) / (c z + d)`
 */
typedef struct {
  PiComplex a;
  PiComplex b;
  PiComplex c;
  PiComplex d;
} PiMoebius;

/**
 * Square grid on a disk; points within `pole_guard` of a pole are skipped.
 */
typedef struct {
  PiComplex center;
  double radius;
  size_t grid_points;
  double pole_guard;
  /**
   * Chain cross-check runs for `N <= oracle_limit`; 0 disables it.
   */
  size_t oracle_limit;
  bool compensated;
} PiRegion;

typedef struct {
  uint64_t n;
  double coeff_err;
  double sup_err;
  double q_n_abs;
  double q_n1_err;
  double r_n_err;
  double r_n1_err;
  double wronskian_resid;
  uint64_t skipped_points;
} PiRatePoint;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Library version as a static NUL-terminated string.
 */
const char *pi_version(void);

/**
 * Message for the last failed call on this thread, or NULL.
 * The pointer stays valid until the next failing call on the same thread.
 */
const char *pi_last_error_message(void);

/**
 * # Safety
 * `json` must be a NUL-terminated string; `out` must be writable.
 */
PiStatus pi_schedule_from_json(const char *json, PiSchedule **out);

/**
 * Rotation-regime schedule, `case` in 1..=3.
 *
 * # Safety
 * `out` must be writable.
 */
PiStatus pi_schedule_theorem_a(uint8_t case_, PiSchedule **out);

/**
 * Combined multiplier/additive schedule, `case` in 1..=5.
 *
 * # Safety
 * `out` must be writable.
 */
PiStatus pi_schedule_theorem_b(uint8_t case_, PiSchedule **out);

/**
 * # Safety
 * `schedule` must come from a `pi_schedule_*` constructor, or be NULL.
 */
void pi_schedule_free(PiSchedule *schedule);

/**
 * Sequences `rho_0..=rho_N`, `eps_0^2..=eps_N^2` for the given N.
 *
 * # Safety
 * `schedule` must be a live handle; `out` must be writable.
 */
PiStatus pi_materialize(const PiSchedule *schedule, size_t n, PiSequences **out);

/**
 * Sequences from caller arrays, each of length `n + 1`.
 *
 * # Safety
 * `rho` and `eps_sq` must point to `n + 1` readable values; `out` must be writable.
 */
PiStatus pi_sequences_from_arrays(size_t n,
                                  const PiComplex *rho,
                                  const PiComplex *eps_sq,
                                  PiSequences **out);

/**
 * # Safety
 * `seqs` must be a live handle or NULL.
 */
void pi_sequences_free(PiSequences *seqs);

/**
 * Step map `f_k`, `k` in 1..=N.
 *
 * # Safety
 * `seqs` must be a live handle; `out` must be writable.
 */
PiStatus pi_sequences_step_map(const PiSequences *seqs, size_t k, PiMoebius *out);

/**
 * # Safety
 * `seqs` must be a live handle; `out` must be writable.
 */
PiStatus pi_run_recurrences(const PiSequences *seqs, bool compensated, PiTriple **out);

/**
 * # Safety
 * `triple` must be a live handle or NULL.
 */
void pi_triple_free(PiTriple *triple);

/**
 * N of the sequences the triple was computed from; 0 for NULL.
 *
 * # Safety
 * `triple` must be a live handle or NULL.
 */
size_t pi_triple_n(const PiTriple *triple);

/**
 * `q_k`, `k` in 0..=N+1.
 *
 * # Safety
 * `triple` must be a live handle; `out` must be writable.
 */
PiStatus pi_triple_q(const PiTriple *triple, size_t k, PiComplex *out);

/**
 * `r_k`, `k` in 0..=N+1.
 *
 * # Safety
 * `triple` must be a live handle; `out` must be writable.
 */
PiStatus pi_triple_r(const PiTriple *triple, size_t k, PiComplex *out);

/**
 * `s_k`, `k` in 0..=N.
 *
 * # Safety
 * `triple` must be a live handle; `out` must be writable.
 */
PiStatus pi_triple_s(const PiTriple *triple, size_t k, PiComplex *out);

/**
 * Coefficients of `f_k o ... o f_1` from the recurrences, `k` in 1..=N.
 *
 * # Safety
 * `triple` must be a live handle; `out` must be writable.
 */
PiStatus pi_triple_coefficients(const PiTriple *triple, size_t k, PiMoebius *out);

/**
 * # Safety
 * `triple` must be a live handle; `out` must be writable.
 */
PiStatus pi_triple_wronskian_residual(const PiTriple *triple, double *out);

/**
 * `outer o inner`
 *
 * # Safety
 * All pointers must be valid.
 */
PiStatus pi_moebius_compose(const PiMoebius *outer, const PiMoebius *inner, PiMoebius *out);

/**
 * # Safety
 * All pointers must be valid.
 */
PiStatus pi_moebius_evaluate(const PiMoebius *map, PiComplex z, PiComplex *out);

/**
 * Distance of `map` from the identity after normalizing `d = 1`.
 *
 * # Safety
 * All pointers must be valid.
 */
PiStatus pi_projective_coeff_error(const PiMoebius *map, double *out);

/**
 * Library defaults for [`pi_run_point`].
 */
PiRegion pi_region_default(void);

/**
 * Errors of one schedule at one N. `region` may be NULL for the defaults.
 *
 * # Safety
 * `schedule` must be a live handle, `region` valid or NULL, `out` writable.
 */
PiStatus pi_run_point(const PiSchedule *schedule,
                      size_t n,
                      const PiRegion *region,
                      PiRatePoint *out);

/**
 * `exp(-lambda^2 N^(2+2 delta) / (2 M^2 n))`
 */
double pi_azuma_tail_bound(double lambda, size_t n, size_t big_n, double delta, double m);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PARIMPLODE_H */
