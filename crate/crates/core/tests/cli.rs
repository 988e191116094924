//! Exit-code and contract tests for the command-line interface.

use std::path::Path;
use std::process::Command;

fn bin() -> Command {
    Command::new(env!("CARGO_BIN_EXE_structcov"))
}

fn run(args: &[&str], out: &Path) -> std::process::Output {
    bin()
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

#[test]
fn malformed_csv_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,2\n3\n").unwrap();
    let out = run(
        &["estimate-cov", "--input", bad.to_str().unwrap(), "--lambda", "0.1"],
        &dir.path().join("out"),
    );
    assert_eq!(out.status.code(), Some(2));
    assert!(!out.stderr.is_empty(), "diagnostic expected on stderr");
}

#[test]
fn non_numeric_cell_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.csv");
    std::fs::write(&bad, "a,b\n1,fish\n2,3\n").unwrap();
    let out = run(
        &["estimate-cov", "--input", bad.to_str().unwrap(), "--lambda", "0.1"],
        &dir.path().join("out"),
    );
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn missing_reference_taxon_exits_2() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    std::fs::write(&counts, "t1,t2\n3,1\n2,5\n4,1\n").unwrap();
    let out = run(
        &["ingest", "--counts", counts.to_str().unwrap(), "--ref", "nope"],
        &dir.path().join("out"),
    );
    assert_eq!(out.status.code(), Some(2));
    let msg = String::from_utf8_lossy(&out.stderr);
    assert!(msg.contains("nope"), "message names the missing taxon: {msg}");
}

#[test]
fn infeasible_precision_program_exits_4() {
    let dir = tempfile::tempdir().unwrap();
    // Two identical columns give a rank-one covariance; at a tiny penalty
    // no coefficient vector can reach the identity column.
    let data = dir.path().join("data.csv");
    let mut body = String::from("a,b\n");
    for i in 0..12 {
        let v = (i as f64) * 0.37 - 2.0;
        body.push_str(&format!("{v},{v}\n"));
    }
    std::fs::write(&data, body).unwrap();
    let out = run(
        &[
            "estimate-prec",
            "--input",
            data.to_str().unwrap(),
            "--lambda-omega",
            "1e-9",
        ],
        &dir.path().join("out"),
    );
    assert_eq!(out.status.code(), Some(4));
}

#[test]
fn estimate_cov_writes_matrix_and_manifest() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    std::fs::write(
        &data,
        "a,b,c\n1.0,2.0,NA\n0.5,NA,1.5\n-1.0,0.0,2.0\n0.2,1.1,NA\n2.2,0.4,0.9\n",
    )
    .unwrap();
    let out_dir = dir.path().join("out");
    let out = run(
        &[
            "estimate-cov",
            "--input",
            data.to_str().unwrap(),
            "--threshold",
            "soft",
            "--lambda",
            "0.1",
            "--report-norms",
        ],
        &out_dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let cov = std::fs::read_to_string(out_dir.join("covariance.csv")).unwrap();
    assert!(cov.starts_with("a,b,c\n"));
    assert_eq!(cov.lines().count(), 4);
    let manifest: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(out_dir.join("manifest.json")).unwrap())
            .unwrap();
    assert_eq!(manifest["subcommand"], "estimate-cov");
    assert_eq!(manifest["lambda"], 0.1);
    assert_eq!(manifest["seed"], 0);
    assert!(manifest["wall_time_secs"].as_f64().unwrap() >= 0.0);
    assert!(manifest["norms"]["frobenius"].as_f64().unwrap() > 0.0);
    assert!(manifest["version"].is_string());
}

#[test]
fn simulate_row_cardinality() {
    let dir = tempfile::tempdir().unwrap();
    let out_dir = dir.path().join("out");
    let out = run(
        &[
            "simulate", "--kind", "band", "--d", "25", "--n", "40,60", "--reps", "2",
            "--estimators", "renorm_soft,naive_soft", "--cv-folds", "3", "--seed", "5",
        ],
        &out_dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let rows = std::fs::read_to_string(out_dir.join("results.csv")).unwrap();
    // header + (2 n-values x 2 reps) rows per estimator x 2 estimators
    assert_eq!(rows.lines().count(), 1 + 2 * 2 * 2);
    assert!(rows.starts_with("kind,estimator,n,d,rep,seed,spectral_error,n_over_logd"));
}

#[test]
fn ingest_round_trips_through_estimate() {
    let dir = tempfile::tempdir().unwrap();
    let counts = dir.path().join("counts.csv");
    let mut body = String::from("ref,t1,t2,t3\n");
    for i in 0..15u64 {
        body.push_str(&format!("{},{},{},{}\n", 1 + i, 2 + i % 5, i % 3, 1 + i % 4));
    }
    std::fs::write(&counts, body).unwrap();
    let out_dir = dir.path().join("out");
    let out = run(
        &["ingest", "--counts", counts.to_str().unwrap(), "--ref", "ref"],
        &out_dir,
    );
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let dataset = out_dir.join("dataset.csv");
    assert!(dataset.exists() && out_dir.join("mask.csv").exists());

    let out2_dir = dir.path().join("out2");
    let out2 = run(
        &[
            "estimate-cov",
            "--input",
            dataset.to_str().unwrap(),
            "--lambda",
            "0.05",
        ],
        &out2_dir,
    );
    assert!(out2.status.success(), "{}", String::from_utf8_lossy(&out2.stderr));
    assert!(out2_dir.join("covariance.csv").exists());
}

#[test]
fn unknown_threshold_kind_is_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("data.csv");
    std::fs::write(&data, "a,b\n1,2\n3,4\n").unwrap();
    let out = run(
        &[
            "estimate-cov",
            "--input",
            data.to_str().unwrap(),
            "--threshold",
            "medium",
            "--lambda",
            "0.1",
        ],
        &dir.path().join("out"),
    );
    assert!(!out.status.success());
}
