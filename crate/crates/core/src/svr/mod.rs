//! Epsilon-insensitive support vector regression.
//!
//! [`fit_svr`] solves the dual with SMO; predictions are
//! `sum_i beta_i K(sv_i, x) + b`. [`grid_search`] picks kernel and
//! hyperparameters by contiguous-block cross-validation on MAE.

mod grid;
mod io;
mod smo;

use serde::{Deserialize, Serialize};

use crate::{Error, FeatureMatrix, Result};

pub use grid::{
    fold_ranges, grid_search, select_feature_length, GridPoint, GridRow, GridSearchOutcome, GridSearchReport,
    KernelKind, LengthSearch, Standardizer, SvrGrid,
};
pub use smo::{max_iterations, solve as solve_dual, DualSolution, KernelMatrix};

/// Dual coefficients at or below this magnitude are not stored.
pub const SUPPORT_THRESHOLD: f64 = 1e-12;
pub const DEFAULT_TOL: f64 = 1e-3;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
pub enum KernelSpec {
    Linear,
    Polynomial { degree: u32, coef: f64 },
    Rbf { gamma: f64 },
}

impl KernelSpec {
    pub fn validate(&self) -> Result<()> {
        match *self {
            KernelSpec::Linear => Ok(()),
            KernelSpec::Polynomial { degree, coef } if degree >= 1 && coef.is_finite() => Ok(()),
            KernelSpec::Rbf { gamma } if gamma > 0.0 && gamma.is_finite() => Ok(()),
            other => Err(Error::InvalidArgument(format!("invalid kernel {other:?}"))),
        }
    }

    /// Kernel value from the dot product and squared distance of a pair.
    #[inline]
    pub fn from_parts(&self, dot: f64, sqdist: f64) -> f64 {
        match *self {
            KernelSpec::Linear => dot,
            KernelSpec::Polynomial { degree, coef } => (dot + coef).powi(degree as i32),
            KernelSpec::Rbf { gamma } => (-gamma * sqdist).exp(),
        }
    }

    fn eval_unchecked(&self, x: &[f64], y: &[f64]) -> f64 {
        match self {
            KernelSpec::Rbf { .. } => {
                let d: f64 = x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum();
                self.from_parts(0.0, d)
            }
            _ => self.from_parts(x.iter().zip(y).map(|(a, b)| a * b).sum(), 0.0),
        }
    }
}

pub fn kernel_eval(spec: &KernelSpec, x: &[f64], y: &[f64]) -> Result<f64> {
    if x.len() != y.len() {
        return Err(Error::Shape(format!(
            "kernel of vectors with {} and {} dims",
            x.len(),
            y.len()
        )));
    }
    Ok(spec.eval_unchecked(x, y))
}

/// Solver outcome recorded at fit time; not persisted.
#[derive(Debug, Clone, PartialEq)]
pub struct FitDiagnostics {
    pub iterations: usize,
    pub converged: bool,
    /// Training samples whose residual disagrees with their dual coefficient.
    pub kkt_violations: usize,
    /// Training row of each stored support vector.
    pub support_indices: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SvrModel {
    pub kernel: KernelSpec,
    pub epsilon: f64,
    pub c: f64,
    pub bias: f64,
    pub dim: usize,
    /// `m x dim`, row-major.
    pub support_vectors: Vec<f64>,
    pub dual_coefs: Vec<f64>,
    pub diagnostics: Option<FitDiagnostics>,
}

impl SvrModel {
    pub fn support_count(&self) -> usize {
        self.dual_coefs.len()
    }

    pub fn support_vector(&self, i: usize) -> &[f64] {
        &self.support_vectors[i * self.dim..(i + 1) * self.dim]
    }

    pub fn predict(&self, x: &[f64]) -> Result<f64> {
        if x.len() != self.dim {
            return Err(Error::Shape(format!(
                "model expects {} features, got {}",
                self.dim,
                x.len()
            )));
        }
        let s: f64 = (0..self.support_count())
            .map(|i| self.dual_coefs[i] * self.kernel.eval_unchecked(self.support_vector(i), x))
            .sum();
        Ok(s + self.bias)
    }

    pub fn predict_rows(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        (0..x.rows()).map(|i| self.predict(x.row(i))).collect()
    }

    pub fn write(&self, path: &std::path::Path) -> Result<()> {
        io::write_model(path, self)
    }

    pub fn read(path: &std::path::Path) -> Result<Self> {
        io::read_model(path)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvrParams {
    pub kernel: KernelSpec,
    pub c: f64,
    pub epsilon: f64,
    pub tol: f64,
}

impl SvrParams {
    pub fn new(kernel: KernelSpec, c: f64, epsilon: f64) -> Self {
        Self {
            kernel,
            c,
            epsilon,
            tol: DEFAULT_TOL,
        }
    }

    pub fn with_tol(mut self, tol: f64) -> Self {
        self.tol = tol;
        self
    }

    fn validate(&self) -> Result<()> {
        self.kernel.validate()?;
        if !(self.c > 0.0 && self.c.is_finite()) {
            return Err(Error::InvalidArgument(format!("C must be positive, got {}", self.c)));
        }
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidArgument(format!(
                "epsilon must be non-negative, got {}",
                self.epsilon
            )));
        }
        if self.tol.is_nan() || self.tol <= 0.0 {
            return Err(Error::InvalidArgument(format!(
                "tol must be positive, got {}",
                self.tol
            )));
        }
        Ok(())
    }
}

pub(crate) fn kernel_matrix(x: &FeatureMatrix, kernel: &KernelSpec) -> KernelMatrix {
    let n = x.rows();
    let mut values = vec![0.0; n * n];
    for i in 0..n {
        for j in i..n {
            let v = kernel.eval_unchecked(x.row(i), x.row(j));
            values[i * n + j] = v;
            values[j * n + i] = v;
        }
    }
    KernelMatrix::new(n, values)
}

/// Counts samples violating the epsilon-SVR optimality conditions within `tol`:
/// zero coefficients need `|e| <= eps + tol`, interior ones `| |e| - eps | <= tol`,
/// bound ones `|e| >= eps - tol`, where `e` is the residual.
pub fn count_kkt_violations(beta: &[f64], pred: &[f64], r: &[f64], c: f64, eps: f64, tol: f64) -> usize {
    beta.iter()
        .zip(pred.iter().zip(r))
        .filter(|(&b, (&p, &t))| {
            let e = (t - p).abs();
            let a = b.abs();
            if a <= SUPPORT_THRESHOLD {
                e > eps + tol
            } else if a >= c * (1.0 - 1e-12) {
                e < eps - tol
            } else {
                (e - eps).abs() > tol
            }
        })
        .count()
}

pub(crate) fn model_from_solution(
    x: &FeatureMatrix,
    r: &[f64],
    params: &SvrParams,
    k: &KernelMatrix,
    sol: DualSolution,
) -> SvrModel {
    let n = x.rows();
    let train_pred: Vec<f64> = (0..n)
        .map(|i| {
            let row = k.row(i);
            sol.beta.iter().zip(row).map(|(b, v)| b * v).sum::<f64>() + sol.bias
        })
        .collect();
    let kkt_violations = count_kkt_violations(&sol.beta, &train_pred, r, params.c, params.epsilon, params.tol);
    let support_indices: Vec<usize> = (0..n).filter(|&i| sol.beta[i].abs() > SUPPORT_THRESHOLD).collect();
    let mut support_vectors = Vec::with_capacity(support_indices.len() * x.cols());
    for &i in &support_indices {
        support_vectors.extend_from_slice(x.row(i));
    }
    if !sol.converged {
        log::warn!(
            "SVR solver stopped after {} iterations without converging ({kkt_violations} KKT violations)",
            sol.iterations
        );
    }
    SvrModel {
        kernel: params.kernel,
        epsilon: params.epsilon,
        c: params.c,
        bias: sol.bias,
        dim: x.cols(),
        dual_coefs: support_indices.iter().map(|&i| sol.beta[i]).collect(),
        support_vectors,
        diagnostics: Some(FitDiagnostics {
            iterations: sol.iterations,
            converged: sol.converged,
            kkt_violations,
            support_indices,
        }),
    }
}

/// Trains an epsilon-SVR on the rows of `x`. A run that hits the iteration
/// cap still returns a model, flagged through its diagnostics.
pub fn fit_svr(x: &FeatureMatrix, r: &[f64], params: &SvrParams) -> Result<SvrModel> {
    params.validate()?;
    if x.rows() != r.len() {
        return Err(Error::Shape(format!("{} rows vs {} targets", x.rows(), r.len())));
    }
    if x.rows() < 2 {
        return Err(Error::InvalidArgument(format!(
            "SVR needs at least 2 samples, got {}",
            x.rows()
        )));
    }
    if !x.data().iter().chain(r).all(|v| v.is_finite()) {
        return Err(Error::Numeric("non-finite value in SVR training data".into()));
    }
    let k = kernel_matrix(x, &params.kernel);
    let sol = smo::solve(&k, r, params.c, params.epsilon, params.tol, max_iterations(x.rows()));
    Ok(model_from_solution(x, r, params, &k, sol))
}
