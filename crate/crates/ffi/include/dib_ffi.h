#ifndef DIB_FFI_H
#define DIB_FFI_H

/* Generated by cbindgen from src/lib.rs; do not edit. */

#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>

#define DIB_FIELD_REAL 0

#define DIB_FIELD_COMPLEX 1

typedef enum DibStatus {
  DIB_STATUS_OK = 0,
  DIB_STATUS_NULL_POINTER = 1,
  DIB_STATUS_INVALID_ARGUMENT = 2,
  DIB_STATUS_DIMENSION = 3,
  DIB_STATUS_NUMERICAL = 4,
  DIB_STATUS_SOLVER = 5,
  DIB_STATUS_IO = 6,
  DIB_STATUS_PANIC = 7,
} DibStatus;

/**
 * Result of the discrete alternating solver.
 */
typedef struct DibBaSolution DibBaSolution;

/**
 * Linear Gaussian multiview model.
 */
typedef struct DibGaussModel DibGaussModel;

/**
 * Discrete joint pmf of `(X_1, .., X_K, Y)`.
 */
typedef struct DibJoint DibJoint;

/**
 * One operating point; quantities in nats. `cost` is NaN for boundary
 * points.
 */
typedef struct DibPoint {
  double s;
  double relevance;
  double sum_complexity;
  double cost;
  uint64_t iterations;
  bool converged;
} DibPoint;

/**
 * Library version as a static NUL-terminated string.
 */
const char *dib_version(void);

/**
 * Message of the last failed call on this thread, or null. The pointer
 * stays valid until the next failing call on the same thread.
 */
const char *dib_last_error(void);

/**
 * Builds a joint pmf from row-major probabilities over `dims` (target last).
 *
 * # Safety
 * `dims` must hold `ndims` values, `probs` must hold `nprobs` values and
 * `out` must be writable.
 */
enum DibStatus dib_joint_new(const size_t *dims,
                             size_t ndims,
                             const double *probs,
                             size_t nprobs,
                             struct DibJoint **out);

/**
 * # Safety
 * `joint` must be null or come from [`dib_joint_new`], and not be used again.
 */
void dib_joint_free(struct DibJoint *joint);

/**
 * Runs the discrete alternating solver with default tolerances.
 * `cardinalities` may be null (then `|U_k| = |X_k|`).
 *
 * # Safety
 * Pointers must be valid for the given lengths; `out` must be writable.
 */
enum DibStatus dib_ba_solve(const struct DibJoint *joint,
                            double s,
                            uint64_t seed,
                            size_t restarts,
                            const size_t *cardinalities,
                            size_t ncard,
                            struct DibBaSolution **out);

/**
 * # Safety
 * `sol` must be null or come from [`dib_ba_solve`], and not be used again.
 */
void dib_ba_solution_free(struct DibBaSolution *sol);

/**
 * # Safety
 * `sol` must be a live solution handle and `out` writable.
 */
enum DibStatus dib_ba_solution_point(const struct DibBaSolution *sol, struct DibPoint *out);

/**
 * Copies encoder `k` (row-major `|X_k| x |U_k|`) into `buf`. The shape is
 * always written to `rows`/`cols`; pass `buf = null` to query it.
 *
 * # Safety
 * `buf` must hold `len` doubles when non-null; `rows`/`cols` writable.
 */
enum DibStatus dib_ba_solution_encoder(const struct DibBaSolution *sol,
                                       size_t k,
                                       double *buf,
                                       size_t len,
                                       size_t *rows,
                                       size_t *cols);

/**
 * Random model with target dimension `n_y` and views of the given sizes.
 *
 * # Safety
 * `dims` must hold `nviews` values and `out` must be writable.
 */
enum DibStatus dib_gauss_model_random(size_t n_y,
                                      const size_t *dims,
                                      size_t nviews,
                                      uint64_t seed,
                                      struct DibGaussModel **out);

/**
 * Scalar model: unit target and noise variances, one gain per view.
 *
 * # Safety
 * `gains` must hold `n` values and `out` must be writable.
 */
enum DibStatus dib_gauss_model_scalar(const double *gains, size_t n, struct DibGaussModel **out);

/**
 * Model from the JSON written by `dib gen-data`.
 *
 * # Safety
 * `json` must be a NUL-terminated string and `out` writable.
 */
enum DibStatus dib_gauss_model_from_json(const char *json, struct DibGaussModel **out);

/**
 * # Safety
 * `model` must be null or a handle from a `dib_gauss_model_*` constructor,
 * and not be used again.
 */
void dib_gauss_model_free(struct DibGaussModel *model);

/**
 * Gaussian alternating solver at one `s`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum DibStatus dib_ba_gauss_solve(const struct DibGaussModel *model,
                                  double s,
                                  uint64_t seed,
                                  uint32_t field_kind,
                                  struct DibPoint *out);

/**
 * Sum-rate boundary at each `s` in `s_grid`; `out` receives `n` points.
 *
 * # Safety
 * `s_grid` must hold `n` values and `out` room for `n` points.
 */
enum DibStatus dib_sum_boundary(const struct DibGaussModel *model,
                                const double *s_grid,
                                size_t n,
                                uint32_t field_kind,
                                struct DibPoint *out);

/**
 * Centralized relevance achievable at total rate `rate`.
 *
 * # Safety
 * `model` must be a live handle and `out` writable.
 */
enum DibStatus dib_cib_bound(const struct DibGaussModel *model,
                             double rate,
                             uint32_t field_kind,
                             double *out);

#endif  /* DIB_FFI_H */
