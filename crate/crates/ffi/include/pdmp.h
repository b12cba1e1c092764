#ifndef PDMP_H
#define PDMP_H

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Result codes of the C interface.
 */
typedef enum PdmpStatus {
  PDMP_STATUS_OK = 0,
  PDMP_STATUS_NULL_POINTER = 1,
  PDMP_STATUS_INVALID_UTF8 = 2,
  PDMP_STATUS_INVALID_MODEL = 3,
  PDMP_STATUS_INVALID_ARGUMENT = 4,
  PDMP_STATUS_NUMERICAL_FAILURE = 5,
  PDMP_STATUS_INTERNAL = 6,
} PdmpStatus;

/**
 * Parsed model.
 */
typedef struct PdmpModel PdmpModel;

/**
 * Solved value field on a lattice.
 */
typedef struct PdmpValueField PdmpValueField;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Parses a model from a NUL-terminated JSON string.
 *
 * # Safety
 * `json` must be a valid C string and `out` a valid pointer.
 */
enum PdmpStatus pdmp_model_from_json(const char *json, struct PdmpModel **out);

/**
 * Releases a model; null is ignored.
 *
 * # Safety
 * `model` must come from [`pdmp_model_from_json`] and not be used afterwards.
 */
void pdmp_model_free(struct PdmpModel *model);

/**
 * State-space dimension, 0 for a null model.
 *
 * # Safety
 * `model` must be null or a live handle.
 */
size_t pdmp_model_dim(const struct PdmpModel *model);

/**
 * Minimal boundary-hitting time over the boundary reset atoms and interior actions
 * (infinite when none reaches the boundary).
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PdmpStatus pdmp_model_epsilon_interior(const struct PdmpModel *model, double *out);

/**
 * Solves for the value function on a lattice with `grid_n` intervals per axis.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PdmpStatus pdmp_solve_primal(const struct PdmpModel *model,
                                  size_t grid_n,
                                  double tol,
                                  struct PdmpValueField **out);

/**
 * Solves the penalized dual problem at penalty level `n`.
 *
 * # Safety
 * `model` must be a live handle and `out` a valid pointer.
 */
enum PdmpStatus pdmp_solve_dual(const struct PdmpModel *model,
                                size_t grid_n,
                                double tol,
                                double n,
                                struct PdmpValueField **out);

/**
 * Interpolated value at `x[0..dim]` for action pair `pair` (0 for primal fields).
 *
 * # Safety
 * `field` must be a live handle, `x` must point to `dim` doubles and `out` be valid.
 */
enum PdmpStatus pdmp_field_eval(const struct PdmpValueField *field,
                                const double *x,
                                size_t dim,
                                size_t pair,
                                double *out);

/**
 * Number of sweeps the solver used, 0 for a null field.
 *
 * # Safety
 * `field` must be null or a live handle.
 */
size_t pdmp_field_iterations(const struct PdmpValueField *field);

/**
 * Last sup-norm change between sweeps, NaN for a null field.
 *
 * # Safety
 * `field` must be null or a live handle.
 */
double pdmp_field_residual(const struct PdmpValueField *field);

/**
 * Releases a value field; null is ignored.
 *
 * # Safety
 * `field` must come from a solve call and not be used afterwards.
 */
void pdmp_field_free(struct PdmpValueField *field);

/**
 * Copies the last error message of this thread into `buf` (NUL-terminated, truncated to
 * `len`) and returns its full length in bytes, or 0 when there is none. A null `buf` only
 * queries the length.
 *
 * # Safety
 * `buf` must be null or point to `len` writable bytes.
 */
size_t pdmp_last_error_message(char *buf, size_t len);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* PDMP_H */
