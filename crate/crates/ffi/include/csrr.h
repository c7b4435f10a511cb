#ifndef CSRR_H
#define CSRR_H

/* Generated by cbindgen. Do not edit. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

typedef enum CsrrStatus {
  CSRR_STATUS_OK = 0,
  CSRR_STATUS_NULL_POINTER = 1,
  CSRR_STATUS_INVALID_ARGUMENT = 2,
  CSRR_STATUS_DIMENSION_MISMATCH = 3,
  CSRR_STATUS_NUMERIC_FAILURE = 4,
  CSRR_STATUS_DIVERGENCE = 5,
  CSRR_STATUS_IO = 6,
  CSRR_STATUS_FORMAT = 7,
  CSRR_STATUS_INTERNAL = 8,
} CsrrStatus;

typedef enum CsrrSolverKind {
  /**
   * Nuclear-norm solver, type I loss.
   */
  CSRR_SOLVER_KIND_CSRR_I = 0,
  /**
   * Nuclear-norm solver, type II loss.
   */
  CSRR_SOLVER_KIND_CSRR_II = 1,
  /**
   * Bilinear-factorization solver.
   */
  CSRR_SOLVER_KIND_CSRR_E = 2,
  /**
   * Nuclear-norm solver without the sparse component.
   */
  CSRR_SOLVER_KIND_CSRR_IV0 = 3,
} CsrrSolverKind;

/**
 * Trained model.
 */
typedef struct CsrrModel CsrrModel;

/**
 * Binary items × users observation matrix.
 */
typedef struct CsrrObservation CsrrObservation;

typedef struct CsrrParams {
  enum CsrrSolverKind solver;
  double eta;
  double lambda1;
  double lambda2;
  /**
   * Positive-class cost; the negative cost is `1 - c_p`.
   */
  double c_p;
  uint64_t max_iters;
  double rel_tol;
  /**
   * Used by `CSRR_SOLVER_KIND_CSRR_E` only.
   */
  uint64_t latent_dim;
  uint64_t inner_max_iters;
  double inner_rel_tol;
  uint64_t seed;
} CsrrParams;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Message for the last failed call on this thread; empty after a success.
 * The pointer stays valid until the next call into this library on the
 * same thread.
 */
const char *csrr_last_error_message(void);

/**
 * Fills `out` with the default solver settings.
 *
 * # Safety
 * `out` must be null or point to writable memory for one `CsrrParams`.
 */
enum CsrrStatus csrr_params_default(struct CsrrParams *out);

/**
 * Builds an observation matrix from `count` positive `(item, user)` pairs.
 *
 * # Safety
 * `items` and `users` must each point to `count` readable values (or be
 * null when `count` is 0); `out` must point to writable memory for one
 * pointer.
 */
enum CsrrStatus csrr_observation_new(uint64_t rows,
                                     uint64_t cols,
                                     const uint64_t *items,
                                     const uint64_t *users,
                                     size_t count,
                                     struct CsrrObservation **out);

/**
 * # Safety
 * `obs` must be null or a handle from `csrr_observation_new` not yet freed.
 */
void csrr_observation_free(struct CsrrObservation *obs);

/**
 * Trains a model on `obs`.
 *
 * # Safety
 * `obs` must be a live observation handle, `params` must point to a valid
 * `CsrrParams`, and `out` to writable memory for one pointer.
 */
enum CsrrStatus csrr_fit(const struct CsrrObservation *obs,
                         const struct CsrrParams *params,
                         struct CsrrModel **out);

/**
 * Writes the predicted matrix shape.
 *
 * # Safety
 * `model` must be a live model handle; `rows` and `cols` must be writable.
 */
enum CsrrStatus csrr_model_dims(const struct CsrrModel *model, uint64_t *rows, uint64_t *cols);

/**
 * Copies the predicted scores, row-major, into `buffer` of `len` doubles.
 * `len` must equal rows × cols.
 *
 * # Safety
 * `model` must be a live model handle and `buffer` must point to `len`
 * writable doubles.
 */
enum CsrrStatus csrr_model_scores(const struct CsrrModel *model, double *buffer, size_t len);

/**
 * # Safety
 * `model` must be a live model handle and `path` a NUL-terminated string.
 */
enum CsrrStatus csrr_model_save(const struct CsrrModel *model, const char *path);

/**
 * # Safety
 * `path` must be a NUL-terminated string and `out` writable memory for one
 * pointer.
 */
enum CsrrStatus csrr_model_load(const char *path, struct CsrrModel **out);

/**
 * # Safety
 * `model` must be null or a handle from `csrr_fit` / `csrr_model_load`
 * not yet freed.
 */
void csrr_model_free(struct CsrrModel *model);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* CSRR_H */
