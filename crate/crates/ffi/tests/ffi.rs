//! End-to-end exercise of the C ABI: dataset -> covariance -> threshold ->
//! precision, all through the exported symbols, plus a check that the
//! generated header is present and exports the surface.

use std::ptr;

use structcov_ffi::*;

#[test]
fn full_pipeline_through_the_c_abi() {
    // 6x3 row-major data with a few structural zeros.
    let n = 6usize;
    let d = 3usize;
    let values: Vec<f64> = vec![
        1.0, 0.3, -0.2, //
        0.8, 0.1, 0.0, //
        -0.5, 0.9, 0.4, //
        1.2, 0.0, -0.7, //
        0.3, -0.4, 0.6, //
        -0.9, 0.5, 0.2,
    ];
    let mask: Vec<u8> = vec![
        1, 1, 1, //
        1, 1, 0, //
        1, 1, 1, //
        1, 0, 1, //
        1, 1, 1, //
        1, 1, 1,
    ];
    unsafe {
        let mut ds: *mut ScDataset = ptr::null_mut();
        assert_eq!(
            sc_dataset_new(values.as_ptr(), mask.as_ptr(), n, d, &mut ds),
            SC_OK
        );
        assert_eq!(sc_dataset_rows(ds), n);
        assert_eq!(sc_dataset_cols(ds), d);

        let mut cov: *mut ScMatrix = ptr::null_mut();
        assert_eq!(sc_covariance_renormalized(ds, &mut cov), SC_OK);
        let mut naive: *mut ScMatrix = ptr::null_mut();
        assert_eq!(sc_covariance_naive(ds, &mut naive), SC_OK);

        let mut spec = 0.0f64;
        assert_eq!(sc_matrix_spectral_norm(cov, &mut spec), SC_OK);
        assert!(spec > 0.0);

        let mut thr: *mut ScMatrix = ptr::null_mut();
        assert_eq!(
            sc_matrix_threshold(cov, SC_THRESHOLD_SOFT, 0.05, 1, &mut thr),
            SC_OK
        );
        let mut buf = vec![0.0f64; d * d];
        assert_eq!(sc_matrix_copy(thr, buf.as_mut_ptr(), buf.len()), SC_OK);
        for i in 0..d {
            for j in 0..d {
                assert!((buf[i * d + j] - buf[j * d + i]).abs() < 1e-12);
            }
        }

        let mut prec: *mut ScPrecision = ptr::null_mut();
        assert_eq!(sc_precision_estimate(cov, 0.4, &mut prec), SC_OK);
        assert!(sc_precision_feasibility_gap(prec) <= 0.4 + 1e-8);
        let mut omega: *mut ScMatrix = ptr::null_mut();
        assert_eq!(sc_precision_matrix(prec, &mut omega), SC_OK);
        assert_eq!(sc_matrix_rows(omega), d);

        sc_matrix_free(omega);
        sc_precision_free(prec);
        sc_matrix_free(thr);
        sc_matrix_free(naive);
        sc_matrix_free(cov);
        sc_dataset_free(ds);
    }
}

#[test]
fn generated_header_exports_the_surface() {
    let header = std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("include/structcov.h");
    let text = std::fs::read_to_string(&header).expect("header generated by build script");
    for symbol in [
        "sc_dataset_new",
        "sc_dataset_free",
        "sc_covariance_renormalized",
        "sc_covariance_naive",
        "sc_matrix_threshold",
        "sc_matrix_copy",
        "sc_matrix_spectral_norm",
        "sc_precision_estimate",
        "sc_precision_matrix",
        "sc_precision_feasibility_gap",
        "sc_last_error_message",
        "ScDataset",
        "ScMatrix",
        "ScPrecision",
    ] {
        assert!(text.contains(symbol), "header is missing {symbol}");
    }
}
