#ifndef STRUCTCOV_H
#define STRUCTCOV_H

/* Generated by cbindgen; do not edit by hand. */

#include <stdarg.h>
#include <stdbool.h>
#include <stddef.h>
#include <stdint.h>
#include <stdlib.h>

/**
 * Success.
 */
#define SC_OK 0

/**
 * A required pointer argument was null or a panic was caught.
 */
#define SC_ERR_NULL 1

/**
 * Invalid input (bad dimensions, bad parameter, parse failure).
 */
#define SC_ERR_INVALID 2

/**
 * Numerical failure (non-convergence, singularity).
 */
#define SC_ERR_NUMERICAL 3

/**
 * The constrained program is infeasible at the requested penalty.
 */
#define SC_ERR_INFEASIBLE 4

/**
 * Hard thresholding selector for [`sc_matrix_threshold`].
 */
#define SC_THRESHOLD_HARD 0

/**
 * Soft thresholding selector for [`sc_matrix_threshold`].
 */
#define SC_THRESHOLD_SOFT 1

/**
 * Opaque handle to a dataset with structural zeros.
 */
typedef struct ScDataset ScDataset;

/**
 * Opaque handle to a dense square matrix (covariance or precision).
 */
typedef struct ScMatrix ScMatrix;

/**
 * Opaque handle to a precision estimate with its feasibility diagnostics.
 */
typedef struct ScPrecision ScPrecision;

#ifdef __cplusplus
extern "C" {
#endif // __cplusplus

/**
 * Returns the error message of the most recent failing call on this
 * thread. The pointer stays valid until the next failing call on the
 * same thread. Never null.
 */
const char *sc_last_error_message(void);

/**
 * Builds a dataset from row-major `values` (length `n_rows * n_cols`) and
 * a row-major 0/1 `mask` of the same shape. Unobserved values are ignored.
 *
 * # Safety
 * `values` and `mask` must point to `n_rows * n_cols` readable elements;
 * `out` must be a valid pointer.
 */
int32_t sc_dataset_new(const double *values,
                       const uint8_t *mask,
                       size_t n_rows,
                       size_t n_cols,
                       struct ScDataset **out);

/**
 * Frees a dataset handle. Null is a no-op.
 *
 * # Safety
 * `handle` must come from this library and not be freed twice.
 */
void sc_dataset_free(struct ScDataset *handle);

/**
 * Number of rows in the dataset; 0 if `handle` is null.
 *
 * # Safety
 * `handle` must be a live dataset handle or null.
 */
size_t sc_dataset_rows(const struct ScDataset *handle);

/**
 * Number of columns in the dataset; 0 if `handle` is null.
 *
 * # Safety
 * `handle` must be a live dataset handle or null.
 */
size_t sc_dataset_cols(const struct ScDataset *handle);

/**
 * Pairwise available-case covariance of the dataset.
 *
 * # Safety
 * `dataset` must be a live handle; `out` must be a valid pointer.
 */
int32_t sc_covariance_renormalized(const struct ScDataset *dataset, struct ScMatrix **out);

/**
 * Zeros-as-values covariance baseline of the dataset.
 *
 * # Safety
 * `dataset` must be a live handle; `out` must be a valid pointer.
 */
int32_t sc_covariance_naive(const struct ScDataset *dataset, struct ScMatrix **out);

/**
 * Applies hard (`SC_THRESHOLD_HARD`) or soft (`SC_THRESHOLD_SOFT`)
 * thresholding at level `lambda`, producing a new matrix. Set
 * `exclude_diagonal` nonzero to leave diagonal entries untouched.
 *
 * # Safety
 * `matrix` must be a live handle; `out` must be a valid pointer.
 */
int32_t sc_matrix_threshold(const struct ScMatrix *matrix,
                            int32_t kind,
                            double lambda,
                            int32_t exclude_diagonal,
                            struct ScMatrix **out);

/**
 * Frees a matrix handle. Null is a no-op.
 *
 * # Safety
 * `handle` must come from this library and not be freed twice.
 */
void sc_matrix_free(struct ScMatrix *handle);

/**
 * Number of rows in the matrix; 0 if `handle` is null.
 *
 * # Safety
 * `handle` must be a live matrix handle or null.
 */
size_t sc_matrix_rows(const struct ScMatrix *handle);

/**
 * Number of columns in the matrix; 0 if `handle` is null.
 *
 * # Safety
 * `handle` must be a live matrix handle or null.
 */
size_t sc_matrix_cols(const struct ScMatrix *handle);

/**
 * Copies the matrix into `buffer` in row-major order. `buffer_len` must be
 * at least rows*cols.
 *
 * # Safety
 * `matrix` must be a live handle; `buffer` must point to `buffer_len`
 * writable doubles.
 */
int32_t sc_matrix_copy(const struct ScMatrix *matrix, double *buffer, size_t buffer_len);

/**
 * Spectral norm of the matrix, written to `*out`.
 *
 * # Safety
 * `matrix` must be a live handle; `out` must be a valid pointer.
 */
int32_t sc_matrix_spectral_norm(const struct ScMatrix *matrix, double *out);

/**
 * Constrained l1 precision estimation from a covariance matrix at
 * penalty `lambda_omega`.
 *
 * # Safety
 * `sigma` must be a live handle; `out` must be a valid pointer.
 */
int32_t sc_precision_estimate(const struct ScMatrix *sigma,
                              double lambda_omega,
                              struct ScPrecision **out);

/**
 * Frees a precision handle. Null is a no-op.
 *
 * # Safety
 * `handle` must come from this library and not be freed twice.
 */
void sc_precision_free(struct ScPrecision *handle);

/**
 * Extracts the precision matrix as a new matrix handle.
 *
 * # Safety
 * `precision` must be a live handle; `out` must be a valid pointer.
 */
int32_t sc_precision_matrix(const struct ScPrecision *precision, struct ScMatrix **out);

/**
 * Worst per-column constraint residual beyond the penalty; 0 when all
 * columns met their constraint. NaN if `handle` is null.
 *
 * # Safety
 * `handle` must be a live precision handle or null.
 */
double sc_precision_feasibility_gap(const struct ScPrecision *handle);

#ifdef __cplusplus
}  // extern "C"
#endif  // __cplusplus

#endif  /* STRUCTCOV_H */
