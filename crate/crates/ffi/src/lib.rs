//! C ABI surface for the structcov library.
//!
//! All functions return an `int32_t` status code (`SC_OK` on success) and
//! deliver results through out-parameters holding opaque handles. Handles
//! must be released with the matching `*_free` function. The last error
//! message on the calling thread is available via [`sc_last_error_message`].
//!
//! Matrices cross the boundary as row-major `double` buffers; masks as
//! row-major `uint8_t` buffers with 1 = observed.

use std::cell::RefCell;
use std::ffi::{c_char, CString};
use std::panic::{catch_unwind, AssertUnwindSafe};

use nalgebra::DMatrix;
use structcov::error::Error;
use structcov::estimator::{naive_covariance, renormalized_covariance, MaskedDataset, NA};
use structcov::mask::ObservationMask;
use structcov::threshold::{threshold_matrix, ThresholdKind, ThresholdOperator};
use structcov::{clime, metrics};

/// Success.
pub const SC_OK: i32 = 0;
/// A required pointer argument was null or a panic was caught.
pub const SC_ERR_NULL: i32 = 1;
/// Invalid input (bad dimensions, bad parameter, parse failure).
pub const SC_ERR_INVALID: i32 = 2;
/// Numerical failure (non-convergence, singularity).
pub const SC_ERR_NUMERICAL: i32 = 3;
/// The constrained program is infeasible at the requested penalty.
pub const SC_ERR_INFEASIBLE: i32 = 4;

/// Hard thresholding selector for [`sc_matrix_threshold`].
pub const SC_THRESHOLD_HARD: i32 = 0;
/// Soft thresholding selector for [`sc_matrix_threshold`].
pub const SC_THRESHOLD_SOFT: i32 = 1;

thread_local! {
    static LAST_ERROR: RefCell<CString> = RefCell::new(CString::new("").unwrap());
}

fn set_error(message: &str) {
    let sanitized = message.replace('\0', " ");
    LAST_ERROR.with(|slot| {
        *slot.borrow_mut() = CString::new(sanitized).unwrap_or_default();
    });
}

fn status_of(err: &Error) -> i32 {
    set_error(&err.to_string());
    err.exit_code()
}

/// Returns the error message of the most recent failing call on this
/// thread. The pointer stays valid until the next failing call on the
/// same thread. Never null.
#[no_mangle]
pub extern "C" fn sc_last_error_message() -> *const c_char {
    LAST_ERROR.with(|slot| slot.borrow().as_ptr())
}

fn guard<F: FnOnce() -> i32>(f: F) -> i32 {
    match catch_unwind(AssertUnwindSafe(f)) {
        Ok(code) => code,
        Err(_) => {
            set_error("internal panic");
            SC_ERR_NULL
        }
    }
}

/// Opaque handle to a dataset with structural zeros.
pub struct ScDataset {
    inner: MaskedDataset,
}

/// Opaque handle to a dense square matrix (covariance or precision).
pub struct ScMatrix {
    inner: DMatrix<f64>,
}

/// Opaque handle to a precision estimate with its feasibility diagnostics.
pub struct ScPrecision {
    inner: clime::PrecisionEstimate,
}

/// Builds a dataset from row-major `values` (length `n_rows * n_cols`) and
/// a row-major 0/1 `mask` of the same shape. Unobserved values are ignored.
///
/// # Safety
/// `values` and `mask` must point to `n_rows * n_cols` readable elements;
/// `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_dataset_new(
    values: *const f64,
    mask: *const u8,
    n_rows: usize,
    n_cols: usize,
    out: *mut *mut ScDataset,
) -> i32 {
    if values.is_null() || mask.is_null() || out.is_null() {
        set_error("null pointer argument");
        return SC_ERR_NULL;
    }
    let len = n_rows.saturating_mul(n_cols);
    let values = std::slice::from_raw_parts(values, len);
    let mask = std::slice::from_raw_parts(mask, len);
    guard(|| {
        let mut value_m = DMatrix::zeros(n_rows, n_cols);
        let mut mask_m = DMatrix::zeros(n_rows, n_cols);
        for i in 0..n_rows {
            for j in 0..n_cols {
                let flat = i * n_cols + j;
                mask_m[(i, j)] = mask[flat];
                value_m[(i, j)] = if mask[flat] != 0 { values[flat] } else { NA };
            }
        }
        let built = ObservationMask::new(mask_m)
            .and_then(|m| MaskedDataset::new(value_m, m));
        match built {
            Ok(inner) => {
                *out = Box::into_raw(Box::new(ScDataset { inner }));
                SC_OK
            }
            Err(e) => status_of(&e),
        }
    })
}

/// Frees a dataset handle. Null is a no-op.
///
/// # Safety
/// `handle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sc_dataset_free(handle: *mut ScDataset) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of rows in the dataset; 0 if `handle` is null.
///
/// # Safety
/// `handle` must be a live dataset handle or null.
#[no_mangle]
pub unsafe extern "C" fn sc_dataset_rows(handle: *const ScDataset) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.n_rows())
}

/// Number of columns in the dataset; 0 if `handle` is null.
///
/// # Safety
/// `handle` must be a live dataset handle or null.
#[no_mangle]
pub unsafe extern "C" fn sc_dataset_cols(handle: *const ScDataset) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.n_cols())
}

/// Pairwise available-case covariance of the dataset.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_covariance_renormalized(
    dataset: *const ScDataset,
    out: *mut *mut ScMatrix,
) -> i32 {
    covariance_impl(dataset, out, false)
}

/// Zeros-as-values covariance baseline of the dataset.
///
/// # Safety
/// `dataset` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_covariance_naive(
    dataset: *const ScDataset,
    out: *mut *mut ScMatrix,
) -> i32 {
    covariance_impl(dataset, out, true)
}

unsafe fn covariance_impl(
    dataset: *const ScDataset,
    out: *mut *mut ScMatrix,
    naive: bool,
) -> i32 {
    let Some(dataset) = dataset.as_ref() else {
        set_error("null dataset handle");
        return SC_ERR_NULL;
    };
    if out.is_null() {
        set_error("null out pointer");
        return SC_ERR_NULL;
    }
    guard(|| {
        let est = if naive {
            naive_covariance(&dataset.inner)
        } else {
            renormalized_covariance(&dataset.inner)
        };
        *out = Box::into_raw(Box::new(ScMatrix {
            inner: est.sigma().clone(),
        }));
        SC_OK
    })
}

/// Applies hard (`SC_THRESHOLD_HARD`) or soft (`SC_THRESHOLD_SOFT`)
/// thresholding at level `lambda`, producing a new matrix. Set
/// `exclude_diagonal` nonzero to leave diagonal entries untouched.
///
/// # Safety
/// `matrix` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_matrix_threshold(
    matrix: *const ScMatrix,
    kind: i32,
    lambda: f64,
    exclude_diagonal: i32,
    out: *mut *mut ScMatrix,
) -> i32 {
    let Some(matrix) = matrix.as_ref() else {
        set_error("null matrix handle");
        return SC_ERR_NULL;
    };
    if out.is_null() {
        set_error("null out pointer");
        return SC_ERR_NULL;
    }
    let kind = match kind {
        SC_THRESHOLD_HARD => ThresholdKind::Hard,
        SC_THRESHOLD_SOFT => ThresholdKind::Soft,
        _ => {
            set_error("kind must be SC_THRESHOLD_HARD or SC_THRESHOLD_SOFT");
            return SC_ERR_INVALID;
        }
    };
    guard(|| match ThresholdOperator::new(kind, lambda) {
        Ok(op) => {
            let result = threshold_matrix(&matrix.inner, &op, exclude_diagonal != 0);
            *out = Box::into_raw(Box::new(ScMatrix { inner: result }));
            SC_OK
        }
        Err(e) => status_of(&e),
    })
}

/// Frees a matrix handle. Null is a no-op.
///
/// # Safety
/// `handle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sc_matrix_free(handle: *mut ScMatrix) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Number of rows in the matrix; 0 if `handle` is null.
///
/// # Safety
/// `handle` must be a live matrix handle or null.
#[no_mangle]
pub unsafe extern "C" fn sc_matrix_rows(handle: *const ScMatrix) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.nrows())
}

/// Number of columns in the matrix; 0 if `handle` is null.
///
/// # Safety
/// `handle` must be a live matrix handle or null.
#[no_mangle]
pub unsafe extern "C" fn sc_matrix_cols(handle: *const ScMatrix) -> usize {
    handle.as_ref().map_or(0, |h| h.inner.ncols())
}

/// Copies the matrix into `buffer` in row-major order. `buffer_len` must be
/// at least rows*cols.
///
/// # Safety
/// `matrix` must be a live handle; `buffer` must point to `buffer_len`
/// writable doubles.
#[no_mangle]
pub unsafe extern "C" fn sc_matrix_copy(
    matrix: *const ScMatrix,
    buffer: *mut f64,
    buffer_len: usize,
) -> i32 {
    let Some(matrix) = matrix.as_ref() else {
        set_error("null matrix handle");
        return SC_ERR_NULL;
    };
    if buffer.is_null() {
        set_error("null buffer");
        return SC_ERR_NULL;
    }
    let (r, c) = matrix.inner.shape();
    let needed = r * c;
    if buffer_len < needed {
        set_error("buffer too small");
        return SC_ERR_INVALID;
    }
    let buffer = std::slice::from_raw_parts_mut(buffer, needed);
    for i in 0..r {
        for j in 0..c {
            buffer[i * c + j] = matrix.inner[(i, j)];
        }
    }
    SC_OK
}

/// Spectral norm of the matrix, written to `*out`.
///
/// # Safety
/// `matrix` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_matrix_spectral_norm(
    matrix: *const ScMatrix,
    out: *mut f64,
) -> i32 {
    let Some(matrix) = matrix.as_ref() else {
        set_error("null matrix handle");
        return SC_ERR_NULL;
    };
    if out.is_null() {
        set_error("null out pointer");
        return SC_ERR_NULL;
    }
    guard(|| match metrics::spectral_norm_default(&matrix.inner) {
        Ok(v) => {
            *out = v;
            SC_OK
        }
        Err(e) => status_of(&e),
    })
}

/// Constrained l1 precision estimation from a covariance matrix at
/// penalty `lambda_omega`.
///
/// # Safety
/// `sigma` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_precision_estimate(
    sigma: *const ScMatrix,
    lambda_omega: f64,
    out: *mut *mut ScPrecision,
) -> i32 {
    let Some(sigma) = sigma.as_ref() else {
        set_error("null matrix handle");
        return SC_ERR_NULL;
    };
    if out.is_null() {
        set_error("null out pointer");
        return SC_ERR_NULL;
    }
    guard(|| match clime::estimate_precision_matrix(&sigma.inner, lambda_omega) {
        Ok(inner) => {
            *out = Box::into_raw(Box::new(ScPrecision { inner }));
            SC_OK
        }
        Err(e) => status_of(&e),
    })
}

/// Frees a precision handle. Null is a no-op.
///
/// # Safety
/// `handle` must come from this library and not be freed twice.
#[no_mangle]
pub unsafe extern "C" fn sc_precision_free(handle: *mut ScPrecision) {
    if !handle.is_null() {
        drop(Box::from_raw(handle));
    }
}

/// Extracts the precision matrix as a new matrix handle.
///
/// # Safety
/// `precision` must be a live handle; `out` must be a valid pointer.
#[no_mangle]
pub unsafe extern "C" fn sc_precision_matrix(
    precision: *const ScPrecision,
    out: *mut *mut ScMatrix,
) -> i32 {
    let Some(precision) = precision.as_ref() else {
        set_error("null precision handle");
        return SC_ERR_NULL;
    };
    if out.is_null() {
        set_error("null out pointer");
        return SC_ERR_NULL;
    }
    *out = Box::into_raw(Box::new(ScMatrix {
        inner: precision.inner.omega().clone(),
    }));
    SC_OK
}

/// Worst per-column constraint residual beyond the penalty; 0 when all
/// columns met their constraint. NaN if `handle` is null.
///
/// # Safety
/// `handle` must be a live precision handle or null.
#[no_mangle]
pub unsafe extern "C" fn sc_precision_feasibility_gap(handle: *const ScPrecision) -> f64 {
    handle.as_ref().map_or(f64::NAN, |h| h.inner.feasibility_gap())
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::ffi::CStr;
    use std::ptr;

    fn dataset_3x2() -> *mut ScDataset {
        // Row-major 3x2; one structural zero at (2, 1).
        let values = [1.0, 2.0, -1.0, 0.5, 3.0, 0.0];
        let mask = [1u8, 1, 1, 1, 1, 0];
        let mut handle: *mut ScDataset = ptr::null_mut();
        let code = unsafe { sc_dataset_new(values.as_ptr(), mask.as_ptr(), 3, 2, &mut handle) };
        assert_eq!(code, SC_OK);
        handle
    }

    #[test]
    fn round_trip_covariance_and_threshold() {
        let ds = dataset_3x2();
        unsafe {
            assert_eq!(sc_dataset_rows(ds), 3);
            assert_eq!(sc_dataset_cols(ds), 2);
            let mut cov: *mut ScMatrix = ptr::null_mut();
            assert_eq!(sc_covariance_renormalized(ds, &mut cov), SC_OK);
            assert_eq!(sc_matrix_rows(cov), 2);
            let mut buf = [0.0f64; 4];
            assert_eq!(sc_matrix_copy(cov, buf.as_mut_ptr(), 4), SC_OK);
            assert!((buf[1] - buf[2]).abs() < 1e-15, "symmetric");
            let mut thr: *mut ScMatrix = ptr::null_mut();
            assert_eq!(
                sc_matrix_threshold(cov, SC_THRESHOLD_SOFT, 1e6, 0, &mut thr),
                SC_OK
            );
            let mut tbuf = [1.0f64; 4];
            assert_eq!(sc_matrix_copy(thr, tbuf.as_mut_ptr(), 4), SC_OK);
            assert!(tbuf.iter().all(|&x| x == 0.0), "huge penalty zeroes all");
            sc_matrix_free(thr);
            sc_matrix_free(cov);
            sc_dataset_free(ds);
        }
    }

    #[test]
    fn precision_of_identity_like_matrix() {
        let ds = dataset_3x2();
        unsafe {
            let mut cov: *mut ScMatrix = ptr::null_mut();
            assert_eq!(sc_covariance_renormalized(ds, &mut cov), SC_OK);
            let mut prec: *mut ScPrecision = ptr::null_mut();
            let code = sc_precision_estimate(cov, 0.5, &mut prec);
            assert_eq!(code, SC_OK);
            assert!(sc_precision_feasibility_gap(prec) <= 0.5 + 1e-8);
            let mut omega: *mut ScMatrix = ptr::null_mut();
            assert_eq!(sc_precision_matrix(prec, &mut omega), SC_OK);
            assert_eq!(sc_matrix_rows(omega), 2);
            sc_matrix_free(omega);
            sc_precision_free(prec);
            sc_matrix_free(cov);
            sc_dataset_free(ds);
        }
    }

    #[test]
    fn errors_set_message_and_code() {
        unsafe {
            let mut out: *mut ScDataset = ptr::null_mut();
            let code = sc_dataset_new(ptr::null(), ptr::null(), 1, 1, &mut out);
            assert_eq!(code, SC_ERR_NULL);
            let msg = CStr::from_ptr(sc_last_error_message());
            assert!(!msg.to_bytes().is_empty());

            // All-zero mask row is invalid input.
            let values = [0.0f64];
            let mask = [0u8];
            let code = sc_dataset_new(values.as_ptr(), mask.as_ptr(), 1, 1, &mut out);
            assert_eq!(code, SC_ERR_INVALID);

            let mut m: *mut ScMatrix = ptr::null_mut();
            let ds = dataset_3x2();
            let mut cov: *mut ScMatrix = ptr::null_mut();
            assert_eq!(sc_covariance_renormalized(ds, &mut cov), SC_OK);
            let code = sc_matrix_threshold(cov, 7, 0.1, 0, &mut m);
            assert_eq!(code, SC_ERR_INVALID);
            let code = sc_matrix_threshold(cov, SC_THRESHOLD_SOFT, -1.0, 0, &mut m);
            assert_eq!(code, SC_ERR_INVALID);
            sc_matrix_free(cov);
            sc_dataset_free(ds);
        }
    }
}
