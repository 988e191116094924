//! Constrained l1 minimization for the precision matrix.
//!
//! Each column j solves min ||beta||_1 subject to ||sigma beta - e_j||_inf
//! <= lambda, as a linear program via the positive/negative part split
//! (2d variables, 2d inequality constraints). The assembled matrix is then
//! symmetrized by keeping the mirror entry of smaller absolute value. The
//! constraint set never requires sigma to be positive semidefinite, which is
//! what makes this the right consumer of the pairwise covariance estimate.

use minilp::{ComparisonOp, OptimizationDirection, Problem};
use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::estimator::CovarianceEstimate;

/// Post-solve slack allowed on the constraint residual.
pub const FEASIBILITY_TOL: f64 = 1e-8;

/// One column of the constrained program.
#[derive(Debug, Clone)]
pub struct ColumnProgram<'a> {
    pub sigma: &'a DMatrix<f64>,
    pub target_index: usize,
    pub lambda: f64,
}

#[derive(Debug, Clone)]
pub struct ColumnSolution {
    pub beta: DVector<f64>,
    /// Achieved ||sigma beta - e_j||_inf.
    pub residual: f64,
}

/// Symmetric precision estimate with solve metadata.
#[derive(Debug, Clone)]
pub struct PrecisionEstimate {
    omega: DMatrix<f64>,
    lambda_omega: f64,
    /// ||sigma omega_1 - I||_inf achieved before symmetrization.
    feasibility_gap: f64,
    per_column_residuals: Vec<f64>,
}

impl PrecisionEstimate {
    pub fn omega(&self) -> &DMatrix<f64> {
        &self.omega
    }

    pub fn lambda_omega(&self) -> f64 {
        self.lambda_omega
    }

    pub fn feasibility_gap(&self) -> f64 {
        self.feasibility_gap
    }

    pub fn per_column_residuals(&self) -> &[f64] {
        &self.per_column_residuals
    }

    pub fn dim(&self) -> usize {
        self.omega.nrows()
    }
}

/// Default penalty grid: 20 log-spaced values in [1e-3, 1].
pub fn default_lambda_grid() -> Vec<f64> {
    crate::threshold::log_spaced_grid(1e-3, 1.0, 20)
}

fn residual_inf(sigma: &DMatrix<f64>, beta: &DVector<f64>, j: usize) -> f64 {
    let r = sigma * beta;
    (0..sigma.nrows())
        .map(|i| (r[i] - if i == j { 1.0 } else { 0.0 }).abs())
        .fold(0.0f64, f64::max)
}

/// Smallest achievable ||sigma beta - e_j||_inf, used to report how far an
/// infeasible penalty was from feasibility.
fn min_achievable_residual(sigma: &DMatrix<f64>, j: usize) -> f64 {
    let d = sigma.nrows();
    let mut pb = Problem::new(OptimizationDirection::Minimize);
    let t = pb.add_var(1.0, (0.0, f64::INFINITY));
    let beta: Vec<_> = (0..d)
        .map(|_| pb.add_var(0.0, (f64::NEG_INFINITY, f64::INFINITY)))
        .collect();
    for r in 0..d {
        let e = if r == j { 1.0 } else { 0.0 };
        let mut upper: Vec<(minilp::Variable, f64)> = vec![(t, -1.0)];
        let mut lower: Vec<(minilp::Variable, f64)> = vec![(t, 1.0)];
        for c in 0..d {
            let coef = sigma[(r, c)];
            if coef != 0.0 {
                upper.push((beta[c], coef));
                lower.push((beta[c], coef));
            }
        }
        pb.add_constraint(upper, ComparisonOp::Le, e);
        pb.add_constraint(lower, ComparisonOp::Ge, e);
    }
    match pb.solve() {
        Ok(sol) => sol.objective(),
        Err(_) => f64::INFINITY,
    }
}

/// Solves one column program to l1 optimality.
pub fn solve_column(prog: &ColumnProgram<'_>) -> Result<ColumnSolution> {
    let sigma = prog.sigma;
    let d = sigma.nrows();
    let j = prog.target_index;
    if sigma.ncols() != d {
        return Err(Error::InvalidInput("sigma must be square".into()));
    }
    if j >= d {
        return Err(Error::InvalidInput(format!(
            "target index {j} out of range for dimension {d}"
        )));
    }
    if !(prog.lambda >= 0.0) {
        return Err(Error::InvalidInput(format!(
            "lambda must be nonnegative, got {}",
            prog.lambda
        )));
    }

    let mut pb = Problem::new(OptimizationDirection::Minimize);
    // beta = pos - neg, objective sum(pos) + sum(neg)
    let pos: Vec<_> = (0..d).map(|_| pb.add_var(1.0, (0.0, f64::INFINITY))).collect();
    let neg: Vec<_> = (0..d).map(|_| pb.add_var(1.0, (0.0, f64::INFINITY))).collect();
    for r in 0..d {
        let e = if r == j { 1.0 } else { 0.0 };
        let mut expr: Vec<(minilp::Variable, f64)> = Vec::with_capacity(2 * d);
        for c in 0..d {
            let coef = sigma[(r, c)];
            if coef != 0.0 {
                expr.push((pos[c], coef));
                expr.push((neg[c], -coef));
            }
        }
        if prog.lambda == 0.0 {
            pb.add_constraint(expr, ComparisonOp::Eq, e);
        } else {
            pb.add_constraint(expr.clone(), ComparisonOp::Le, e + prog.lambda);
            pb.add_constraint(expr, ComparisonOp::Ge, e - prog.lambda);
        }
    }
    let sol = pb.solve().map_err(|err| match err {
        minilp::Error::Infeasible => Error::Infeasible {
            column: j,
            requested: prog.lambda,
            min_residual: min_achievable_residual(sigma, j),
        },
        minilp::Error::Unbounded => {
            Error::Numerical(format!("column {j} program reported unbounded"))
        }
    })?;
    let beta = DVector::from_fn(d, |c, _| sol[pos[c]] - sol[neg[c]]);
    let residual = residual_inf(sigma, &beta, j);
    if residual > prog.lambda + FEASIBILITY_TOL {
        return Err(Error::Numerical(format!(
            "column {j} solution violates its constraint: residual {residual} > {} + {FEASIBILITY_TOL}",
            prog.lambda
        )));
    }
    Ok(ColumnSolution { beta, residual })
}

/// Solves all d column programs against a covariance estimate and
/// symmetrizes the assembled solution.
pub fn estimate_precision(
    sigma: &CovarianceEstimate,
    lambda_omega: f64,
) -> Result<PrecisionEstimate> {
    estimate_precision_matrix(sigma.sigma(), lambda_omega)
}

/// Same as [`estimate_precision`] on a bare symmetric matrix.
pub fn estimate_precision_matrix(
    sigma: &DMatrix<f64>,
    lambda_omega: f64,
) -> Result<PrecisionEstimate> {
    let d = sigma.nrows();
    if sigma.ncols() != d {
        return Err(Error::InvalidInput("sigma must be square".into()));
    }
    let columns: Vec<Result<ColumnSolution>> = (0..d)
        .into_par_iter()
        .map(|j| {
            solve_column(&ColumnProgram {
                sigma,
                target_index: j,
                lambda: lambda_omega,
            })
        })
        .collect();
    let mut omega1 = DMatrix::zeros(d, d);
    let mut residuals = Vec::with_capacity(d);
    for (j, col) in columns.into_iter().enumerate() {
        let col = col?;
        omega1.set_column(j, &col.beta);
        residuals.push(col.residual);
    }
    let feasibility_gap = residuals.iter().cloned().fold(0.0f64, f64::max);
    Ok(PrecisionEstimate {
        omega: symmetrize(&omega1),
        lambda_omega,
        feasibility_gap,
        per_column_residuals: residuals,
    })
}

/// Keeps whichever mirror entry has the smaller absolute value; ties keep
/// the (i, j) entry with i < j ordering of the input.
pub fn symmetrize(omega1: &DMatrix<f64>) -> DMatrix<f64> {
    let d = omega1.nrows();
    assert_eq!(d, omega1.ncols(), "symmetrize requires a square matrix");
    let mut out = DMatrix::zeros(d, d);
    for i in 0..d {
        out[(i, i)] = omega1[(i, i)];
        for j in (i + 1)..d {
            let a = omega1[(i, j)];
            let b = omega1[(j, i)];
            let v = if a.abs() <= b.abs() { a } else { b };
            out[(i, j)] = v;
            out[(j, i)] = v;
        }
    }
    out
}
