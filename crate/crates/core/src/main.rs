use std::path::PathBuf;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use nalgebra::DMatrix;

use structcov::classify::{self, CovStrategy, EvaluateConfig, PenaltyChoice};
use structcov::clime;
use structcov::error::{Error, Result};
use structcov::estimator::renormalized_covariance;
use structcov::ingest;
use structcov::io;
use structcov::mask::{check_a1, pairwise_counts};
use structcov::metrics;
use structcov::simgen::{EstimatorKind, ExperimentGrid, GraphKind};
use structcov::threshold::{
    apply_threshold_opts, default_lambda_grid, ThresholdKind, ThresholdOperator,
};
use structcov::tuning::{cv_covariance, cv_precision, CvConfig};

#[derive(Parser)]
#[command(name = "structcov", version, about = "Sparse covariance and precision estimation under structural zeros")]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// Root seed; every run is fully determined by (config, seed).
    #[arg(long, global = true, default_value_t = 0)]
    seed: u64,

    /// Worker threads ("auto" uses all cores).
    #[arg(long, global = true, default_value = "auto")]
    threads: String,

    /// Output directory.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
}

#[derive(Subcommand)]
enum Command {
    /// Run the band/cluster estimator-comparison experiment.
    Simulate(SimulateArgs),
    /// Estimate a thresholded covariance matrix from a dataset CSV.
    EstimateCov(EstimateCovArgs),
    /// Estimate a precision matrix by constrained l1 minimization.
    EstimatePrec(EstimatePrecArgs),
    /// Convert a taxa count table into a log-ratio masked dataset.
    Ingest(IngestArgs),
    /// Repeated-split discriminant classification from a count table.
    Classify(ClassifyArgs),
}

#[derive(Args)]
struct SimulateArgs {
    #[arg(long)]
    kind: GraphKind,
    /// Comma-separated sample sizes.
    #[arg(long, value_delimiter = ',')]
    n: Vec<usize>,
    /// Comma-separated dimensions.
    #[arg(long, value_delimiter = ',')]
    d: Vec<usize>,
    #[arg(long, default_value_t = 20)]
    reps: usize,
    /// Estimators to compare (default: all six).
    #[arg(long, value_delimiter = ',')]
    estimators: Vec<EstimatorKind>,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    /// Size of the log-spaced precision penalty grid.
    #[arg(long, default_value_t = 20)]
    prec_grid_size: usize,
}

#[derive(Args)]
struct EstimateCovArgs {
    #[arg(long)]
    input: PathBuf,
    #[arg(long, default_value = "soft")]
    threshold: ThresholdKind,
    /// Penalty value, or "cv" for cross-validated selection.
    #[arg(long, default_value = "cv")]
    lambda: String,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    /// Comma-separated penalty grid, or "auto".
    #[arg(long, default_value = "auto")]
    grid: String,
    /// Leave diagonal entries unthresholded.
    #[arg(long)]
    exclude_diagonal: bool,
    /// Record matrix norms of the estimate in the manifest.
    #[arg(long)]
    report_norms: bool,
    /// Also emit the (A1) co-observation diagnostic at this fraction.
    #[arg(long)]
    a1_min_fraction: Option<f64>,
}

#[derive(Args)]
struct EstimatePrecArgs {
    #[arg(long)]
    input: PathBuf,
    /// Penalty value, or "cv".
    #[arg(long, default_value = "cv")]
    lambda_omega: String,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
    /// Comma-separated penalty grid, or "auto".
    #[arg(long, default_value = "auto")]
    grid: String,
    #[arg(long)]
    report_norms: bool,
}

#[derive(Args)]
struct IngestArgs {
    #[arg(long)]
    counts: PathBuf,
    /// Name of the reference taxon (must be present in every sample).
    #[arg(long = "ref")]
    reference: String,
    #[arg(long, default_value_t = 0.2)]
    min_prevalence: f64,
}

#[derive(Args)]
struct ClassifyArgs {
    #[arg(long)]
    counts: PathBuf,
    #[arg(long = "ref")]
    reference: String,
    /// The two group labels to classify; defaults to the table's two
    /// distinct labels when unambiguous.
    #[arg(long, value_delimiter = ',')]
    groups: Vec<String>,
    #[arg(long, default_value_t = 25)]
    k: usize,
    #[arg(long, default_value = "soft")]
    estimator: CovStrategy,
    #[arg(long, default_value_t = 20)]
    repeats: usize,
    #[arg(long, default_value_t = 5.0 / 6.0)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0.2)]
    min_prevalence: f64,
    /// Penalty value, or "cv".
    #[arg(long, default_value = "cv")]
    lambda: String,
    #[arg(long, default_value_t = 5)]
    cv_folds: usize,
}

fn main() {
    env_logger::init();
    let cli = Cli::parse();
    configure_threads(&cli.threads);
    let start = Instant::now();
    let result = match &cli.command {
        Command::Simulate(args) => run_simulate(&cli, args),
        Command::EstimateCov(args) => run_estimate_cov(&cli, args),
        Command::EstimatePrec(args) => run_estimate_prec(&cli, args),
        Command::Ingest(args) => run_ingest(&cli, args),
        Command::Classify(args) => run_classify(&cli, args),
    };
    match result {
        Ok(mut manifest) => {
            manifest["seed"] = serde_json::json!(cli.seed);
            manifest["version"] = serde_json::json!(env!("CARGO_PKG_VERSION"));
            manifest["wall_time_secs"] = serde_json::json!(start.elapsed().as_secs_f64());
            if let Err(err) = io::write_manifest(&cli.out.join("manifest.json"), &manifest) {
                eprintln!("error: {err}");
                std::process::exit(err.exit_code());
            }
        }
        Err(err) => {
            eprintln!("error: {err}");
            std::process::exit(err.exit_code());
        }
    }
}

fn configure_threads(threads: &str) {
    if threads == "auto" {
        return;
    }
    if let Ok(n) = threads.parse::<usize>() {
        let _ = rayon::ThreadPoolBuilder::new().num_threads(n).build_global();
    } else {
        eprintln!("error: --threads expects a number or 'auto'");
        std::process::exit(2);
    }
}

fn parse_penalty(raw: &str, flag: &str) -> Result<Option<f64>> {
    if raw == "cv" {
        return Ok(None);
    }
    raw.parse::<f64>().map(Some).map_err(|_| {
        Error::InvalidInput(format!("--{flag} expects a number or 'cv', got '{raw}'"))
    })
}

fn parse_grid(raw: &str) -> Result<Option<Vec<f64>>> {
    if raw == "auto" {
        return Ok(None);
    }
    raw.split(',')
        .map(|s| {
            s.trim()
                .parse::<f64>()
                .map_err(|_| Error::InvalidInput(format!("bad grid value '{s}'")))
        })
        .collect::<Result<Vec<f64>>>()
        .map(Some)
}

fn run_simulate(cli: &Cli, args: &SimulateArgs) -> Result<serde_json::Value> {
    let estimators = if args.estimators.is_empty() {
        EstimatorKind::ALL.to_vec()
    } else {
        args.estimators.clone()
    };
    let grid = ExperimentGrid {
        n_values: args.n.clone(),
        d_values: args.d.clone(),
        replicates: args.reps,
        estimators: estimators.clone(),
        seed: cli.seed,
        cv_folds: args.cv_folds,
        precision_grid_size: args.prec_grid_size,
    };
    let rows = structcov::simgen::run_experiment(&grid, args.kind)?;
    let out = cli.out.join("results.csv");
    io::write_experiment_rows(&out, &rows)?;
    Ok(serde_json::json!({
        "subcommand": "simulate",
        "kind": args.kind,
        "n": args.n,
        "d": args.d,
        "reps": args.reps,
        "estimators": estimators.iter().map(|e| e.to_string()).collect::<Vec<_>>(),
        "cv_folds": args.cv_folds,
        "prec_grid_size": args.prec_grid_size,
        "rows": rows.len(),
        "outputs": [out],
    }))
}

fn run_estimate_cov(cli: &Cli, args: &EstimateCovArgs) -> Result<serde_json::Value> {
    let (data, names) = io::read_dataset(&args.input)?;
    let est = renormalized_covariance(&data);
    let fixed = parse_penalty(&args.lambda, "lambda")?;
    let mut curve_path = None;
    let lambda = match fixed {
        Some(l) => l,
        None => {
            let grid = match parse_grid(&args.grid)? {
                Some(g) => g,
                None => default_lambda_grid(&est),
            };
            let cfg = CvConfig::new(args.cv_folds, grid, cli.seed)?;
            let cv = cv_covariance(&data, args.threshold, &cfg)?;
            let path = cli.out.join("lambda_curve.csv");
            io::write_loss_curve(&path, &cv.curve)?;
            curve_path = Some(path);
            cv.selected
        }
    };
    let op = ThresholdOperator::new(args.threshold, lambda)?;
    let thresholded = apply_threshold_opts(&est, &op, args.exclude_diagonal);
    let out = cli.out.join("covariance.csv");
    io::write_matrix(&out, thresholded.sigma(), &names)?;
    let mut manifest = serde_json::json!({
        "subcommand": "estimate-cov",
        "input": args.input,
        "threshold": args.threshold,
        "lambda": lambda,
        "lambda_source": if fixed.is_some() { "fixed" } else { "cv" },
        "exclude_diagonal": args.exclude_diagonal,
        "zeroed_pairs": est.zeroed_pairs().len(),
        "outputs": [&out],
    });
    if let Some(p) = curve_path {
        manifest["loss_curve"] = serde_json::json!(p);
    }
    if args.report_norms {
        manifest["norms"] = norms_json(thresholded.sigma());
    }
    if let Some(frac) = args.a1_min_fraction {
        let report = check_a1(&pairwise_counts(data.mask()), frac)?;
        manifest["a1"] = serde_json::json!({
            "pass": report.pass,
            "min_fraction": report.min_fraction,
            "failing_pairs": report.failing_pairs,
        });
    }
    Ok(manifest)
}

fn run_estimate_prec(cli: &Cli, args: &EstimatePrecArgs) -> Result<serde_json::Value> {
    let (data, names) = io::read_dataset(&args.input)?;
    let est = renormalized_covariance(&data);
    let fixed = parse_penalty(&args.lambda_omega, "lambda-omega")?;
    let mut curve_path = None;
    let lambda = match fixed {
        Some(l) => l,
        None => {
            let grid = match parse_grid(&args.grid)? {
                Some(g) => g,
                None => clime::default_lambda_grid(),
            };
            let cfg = CvConfig::new(args.cv_folds, grid, cli.seed)?;
            let cv = cv_precision(&data, &cfg)?;
            let path = cli.out.join("lambda_omega_curve.csv");
            io::write_loss_curve(&path, &cv.curve)?;
            curve_path = Some(path);
            cv.selected
        }
    };
    let prec = clime::estimate_precision(&est, lambda)?;
    let out = cli.out.join("precision.csv");
    io::write_matrix(&out, prec.omega(), &names)?;
    let meta_path = cli.out.join("precision_meta.json");
    io::write_manifest(
        &meta_path,
        &serde_json::json!({
            "lambda_omega": prec.lambda_omega(),
            "feasibility_gap": prec.feasibility_gap(),
            "per_column_residuals": prec.per_column_residuals(),
        }),
    )?;
    let mut manifest = serde_json::json!({
        "subcommand": "estimate-prec",
        "input": args.input,
        "lambda_omega": lambda,
        "lambda_source": if fixed.is_some() { "fixed" } else { "cv" },
        "feasibility_gap": prec.feasibility_gap(),
        "outputs": [&out, &meta_path],
    });
    if let Some(p) = curve_path {
        manifest["loss_curve"] = serde_json::json!(p);
    }
    if args.report_norms {
        manifest["norms"] = norms_json(prec.omega());
    }
    Ok(manifest)
}

fn run_ingest(cli: &Cli, args: &IngestArgs) -> Result<serde_json::Value> {
    let table = io::read_count_table(&args.counts)?;
    let filtered = ingest::prevalence_filter(&table, args.min_prevalence)?;
    let ref_index = filtered.taxon_index(&args.reference).ok_or_else(|| {
        Error::InvalidInput(format!(
            "reference taxon '{}' not found after prevalence filtering",
            args.reference
        ))
    })?;
    let reference = ingest::validate_reference(&filtered, ref_index)?;
    let result = ingest::log_ratio_transform(&filtered, reference)?;
    let data_path = cli.out.join("dataset.csv");
    io::write_dataset(&data_path, &result.data, &result.taxa_names)?;
    let mask_path = cli.out.join("mask.csv");
    io::write_mask(&mask_path, result.data.mask(), &result.taxa_names)?;
    Ok(serde_json::json!({
        "subcommand": "ingest",
        "counts": args.counts,
        "reference": args.reference,
        "min_prevalence": args.min_prevalence,
        "taxa_in": table.n_taxa(),
        "taxa_kept": filtered.n_taxa(),
        "rows_dropped": result.dropped_rows,
        "outputs": [&data_path, &mask_path],
    }))
}

fn run_classify(cli: &Cli, args: &ClassifyArgs) -> Result<serde_json::Value> {
    let table = io::read_count_table(&args.counts)?;
    let filtered = ingest::prevalence_filter(&table, args.min_prevalence)?;
    let ref_index = filtered.taxon_index(&args.reference).ok_or_else(|| {
        Error::InvalidInput(format!(
            "reference taxon '{}' not found after prevalence filtering",
            args.reference
        ))
    })?;
    let reference = ingest::validate_reference(&filtered, ref_index)?;
    let result = ingest::log_ratio_transform(&filtered, reference)?;
    let group_labels = result.group_labels.clone().ok_or_else(|| {
        Error::InvalidInput("classification requires a 'group' column in the count table".into())
    })?;
    let classes = resolve_classes(&args.groups, &group_labels)?;
    let keep_rows: Vec<usize> = group_labels
        .iter()
        .enumerate()
        .filter(|(_, g)| classes.contains(g))
        .map(|(i, _)| i)
        .collect();
    if keep_rows.is_empty() {
        return Err(Error::InvalidInput("no rows match the requested groups".into()));
    }
    let data = result.data.select_rows(&keep_rows)?;
    let labels: Vec<usize> = keep_rows
        .iter()
        .map(|&i| usize::from(group_labels[i] == classes[1]))
        .collect();
    let penalty = match parse_penalty(&args.lambda, "lambda")? {
        Some(l) => PenaltyChoice::Fixed(l),
        None => {
            let grid = match args.estimator {
                CovStrategy::Clime => clime::default_lambda_grid(),
                _ => default_lambda_grid(&renormalized_covariance(&data)),
            };
            PenaltyChoice::Cv(CvConfig::new(args.cv_folds, grid, cli.seed)?)
        }
    };
    let mut cfg = EvaluateConfig::new(args.k, args.estimator, penalty, cli.seed);
    cfg.repeats = args.repeats;
    cfg.train_fraction = args.train_fraction;
    let report = classify::evaluate(&data, &labels, &cfg)?;
    let out = cli.out.join("report.csv");
    let body = format!(
        "estimator,k,class1_pct,class2_pct,overall_pct\n{},{},{},{},{}\n",
        args.estimator, args.k, report.class_pct[0], report.class_pct[1], report.overall_pct
    );
    io::write_atomic(&out, &body)?;
    Ok(serde_json::json!({
        "subcommand": "classify",
        "counts": args.counts,
        "reference": args.reference,
        "classes": classes,
        "k": args.k,
        "estimator": args.estimator,
        "repeats": args.repeats,
        "train_fraction": args.train_fraction,
        "class1_pct": report.class_pct[0],
        "class2_pct": report.class_pct[1],
        "overall_pct": report.overall_pct,
        "outputs": [&out],
    }))
}

fn resolve_classes(requested: &[String], labels: &[String]) -> Result<[String; 2]> {
    if requested.len() == 2 {
        return Ok([requested[0].clone(), requested[1].clone()]);
    }
    if !requested.is_empty() {
        return Err(Error::InvalidInput(
            "--groups expects exactly two comma-separated labels".into(),
        ));
    }
    let mut distinct: Vec<String> = labels.to_vec();
    distinct.sort();
    distinct.dedup();
    if distinct.len() != 2 {
        return Err(Error::InvalidInput(format!(
            "table has {} distinct groups; pass --groups to pick two",
            distinct.len()
        )));
    }
    Ok([distinct[0].clone(), distinct[1].clone()])
}

fn norms_json(m: &DMatrix<f64>) -> serde_json::Value {
    let r = metrics::norms(m);
    serde_json::json!({
        "l0": r.l0,
        "l1": r.l1,
        "sup": r.sup,
        "spectral": r.spectral,
        "frobenius": r.frobenius,
    })
}
