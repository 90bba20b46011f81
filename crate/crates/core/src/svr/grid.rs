//! Standardization, contiguous-block folds and grid search.

use std::fmt::Write as _;
use std::fs;
use std::ops::Range;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::smo::{self, KernelMatrix};
use super::{fit_svr, KernelSpec, SvrModel, SvrParams};
use crate::mrmr::SelectionResult;
use crate::{Error, FeatureMatrix, Result};

/// Per-column affine map to zero mean and unit variance. Columns with
/// (near) zero spread keep unit scale.
#[derive(Debug, Clone, PartialEq)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    pub fn fit(x: &FeatureMatrix) -> Result<Self> {
        if x.rows() == 0 {
            return Err(Error::InvalidArgument("cannot standardize zero rows".into()));
        }
        let n = x.rows() as f64;
        let mut mean = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for (m, v) in mean.iter_mut().zip(x.row(i)) {
                *m += v;
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0; x.cols()];
        for i in 0..x.rows() {
            for ((s, v), m) in var.iter_mut().zip(x.row(i)).zip(&mean) {
                *s += (v - m) * (v - m);
            }
        }
        let scale = var
            .into_iter()
            .map(|s| {
                let sd = (s / n).sqrt();
                if sd > 1e-12 {
                    sd
                } else {
                    1.0
                }
            })
            .collect();
        Ok(Self { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &[f64]) -> Vec<f64> {
        row.iter()
            .zip(self.mean.iter().zip(&self.scale))
            .map(|(v, (m, s))| (v - m) / s)
            .collect()
    }

    pub fn apply(&self, x: &FeatureMatrix) -> Result<FeatureMatrix> {
        if x.cols() != self.dim() {
            return Err(Error::Shape(format!(
                "standardizer has {} columns, matrix has {}",
                self.dim(),
                x.cols()
            )));
        }
        let mut data = Vec::with_capacity(x.data().len());
        for i in 0..x.rows() {
            data.extend(self.apply_row(x.row(i)));
        }
        FeatureMatrix::new(x.rows(), x.cols(), data)
    }

    /// One `mean,scale` line per column.
    pub fn write(&self, path: &Path) -> Result<()> {
        let mut s = String::from("mean,scale\n");
        for (m, sc) in self.mean.iter().zip(&self.scale) {
            let _ = writeln!(s, "{m},{sc}");
        }
        fs::write(path, s).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let mut lines = text.lines();
        if lines.next() != Some("mean,scale") {
            return Err(Error::format(path, "expected header \"mean,scale\""));
        }
        let (mut mean, mut scale) = (Vec::new(), Vec::new());
        for (i, line) in lines.enumerate().filter(|(_, l)| !l.is_empty()) {
            let parsed = line
                .split_once(',')
                .and_then(|(a, b)| Some((a.parse::<f64>().ok()?, b.parse::<f64>().ok()?)));
            let Some((m, s)) = parsed else {
                return Err(Error::format(path, format!("line {}: malformed row {line:?}", i + 2)));
            };
            mean.push(m);
            scale.push(s);
        }
        Ok(Self { mean, scale })
    }
}

/// Contiguous fold `f` of `n` samples covers `[f n / k, (f + 1) n / k)`.
pub fn fold_ranges(n: usize, folds: usize) -> Result<Vec<Range<usize>>> {
    if folds < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 folds, got {folds}")));
    }
    if n < folds {
        return Err(Error::InvalidArgument(format!("{n} samples cannot fill {folds} folds")));
    }
    Ok((0..folds).map(|f| f * n / folds..(f + 1) * n / folds).collect())
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum KernelKind {
    Linear,
    Polynomial,
    Rbf,
}

/// Hyperparameter grid. RBF widths are `gamma = 2^k / L` for each exponent
/// `k`, where `L` is the feature length.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SvrGrid {
    pub kernels: Vec<KernelKind>,
    pub c: Vec<f64>,
    pub epsilon: Vec<f64>,
    pub gamma_exponents: Vec<i32>,
    pub degrees: Vec<u32>,
    pub poly_coef: f64,
    pub folds: usize,
    pub tol: f64,
}

impl Default for SvrGrid {
    fn default() -> Self {
        Self {
            kernels: vec![KernelKind::Linear, KernelKind::Polynomial, KernelKind::Rbf],
            c: vec![0.1, 1.0, 10.0, 100.0],
            epsilon: vec![0.001, 0.01, 0.1],
            gamma_exponents: vec![-2, -1, 0, 1, 2],
            degrees: vec![2, 3],
            poly_coef: 1.0,
            folds: 5,
            tol: super::DEFAULT_TOL,
        }
    }
}

impl SvrGrid {
    /// Grid points in scan order: kernel, kernel parameter, C, epsilon.
    pub fn points(&self, dim: usize) -> Vec<GridPoint> {
        let mut kernels = Vec::new();
        for kind in &self.kernels {
            match kind {
                KernelKind::Linear => kernels.push(KernelSpec::Linear),
                KernelKind::Polynomial => kernels.extend(self.degrees.iter().map(|&degree| KernelSpec::Polynomial {
                    degree,
                    coef: self.poly_coef,
                })),
                KernelKind::Rbf => kernels.extend(self.gamma_exponents.iter().map(|&k| KernelSpec::Rbf {
                    gamma: 2f64.powi(k) / dim.max(1) as f64,
                })),
            }
        }
        let mut out = Vec::new();
        for kernel in kernels {
            for &c in &self.c {
                for &epsilon in &self.epsilon {
                    out.push(GridPoint { kernel, c, epsilon });
                }
            }
        }
        out
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridPoint {
    pub kernel: KernelSpec,
    pub c: f64,
    pub epsilon: f64,
}

impl GridPoint {
    pub fn params(&self, tol: f64) -> SvrParams {
        SvrParams::new(self.kernel, self.c, self.epsilon).with_tol(tol)
    }

    fn csv_fields(&self) -> String {
        let (name, degree, coef, gamma) = match self.kernel {
            KernelSpec::Linear => ("linear", String::new(), String::new(), String::new()),
            KernelSpec::Polynomial { degree, coef } => {
                ("polynomial", degree.to_string(), coef.to_string(), String::new())
            }
            KernelSpec::Rbf { gamma } => ("rbf", String::new(), String::new(), gamma.to_string()),
        };
        format!("{name},{degree},{coef},{gamma},{},{}", self.c, self.epsilon)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridRow {
    pub point: GridPoint,
    pub mean_mae: f64,
    pub fold_maes: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GridSearchReport {
    pub tried: Vec<GridRow>,
    /// Index into `tried` of the first row with minimal mean MAE.
    pub best: usize,
}

impl GridSearchReport {
    pub const CSV_HEADER: &'static str = "kernel,degree,coef,gamma,c,epsilon,mean_mae,fold_maes";

    pub fn best_row(&self) -> &GridRow {
        &self.tried[self.best]
    }

    /// One line per grid point; fold MAEs are `;`-separated.
    pub fn csv_rows(&self) -> Vec<String> {
        self.tried
            .iter()
            .map(|row| {
                let folds: Vec<String> = row.fold_maes.iter().map(f64::to_string).collect();
                format!("{},{},{}", row.point.csv_fields(), row.mean_mae, folds.join(";"))
            })
            .collect()
    }
}

#[derive(Debug, Clone)]
pub struct GridSearchOutcome {
    pub report: GridSearchReport,
    /// Fitted on all rows; the model expects standardized input.
    pub scaler: Standardizer,
    pub model: SvrModel,
}

impl GridSearchOutcome {
    pub fn predict_rows(&self, x: &FeatureMatrix) -> Result<Vec<f64>> {
        self.model.predict_rows(&self.scaler.apply(x)?)
    }
}

/// Standardized pairwise products for one fold.
struct FoldCache {
    train_rows: usize,
    test_targets: Vec<f64>,
    train_targets: Vec<f64>,
    train_dot: Vec<f64>,
    train_sq: Vec<f64>,
    test_dot: Vec<f64>,
    test_sq: Vec<f64>,
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

impl FoldCache {
    fn build(x: &FeatureMatrix, r: &[f64], test: Range<usize>) -> Result<Self> {
        let train_idx: Vec<usize> = (0..x.rows()).filter(|i| !test.contains(i)).collect();
        let test_idx: Vec<usize> = test.collect();
        let scaler = Standardizer::fit(&x.select_rows(&train_idx))?;
        let tr = scaler.apply(&x.select_rows(&train_idx))?;
        let te = scaler.apply(&x.select_rows(&test_idx))?;
        let (nt, ne) = (tr.rows(), te.rows());
        let tr_norm: Vec<f64> = (0..nt).map(|i| dot(tr.row(i), tr.row(i))).collect();
        let mut train_dot = vec![0.0; nt * nt];
        let mut train_sq = vec![0.0; nt * nt];
        for i in 0..nt {
            for j in i..nt {
                let d = dot(tr.row(i), tr.row(j));
                let s = (tr_norm[i] + tr_norm[j] - 2.0 * d).max(0.0);
                train_dot[i * nt + j] = d;
                train_dot[j * nt + i] = d;
                train_sq[i * nt + j] = s;
                train_sq[j * nt + i] = s;
            }
            train_sq[i * nt + i] = 0.0;
        }
        let mut test_dot = vec![0.0; ne * nt];
        let mut test_sq = vec![0.0; ne * nt];
        for i in 0..ne {
            let ni = dot(te.row(i), te.row(i));
            for j in 0..nt {
                let d = dot(te.row(i), tr.row(j));
                test_dot[i * nt + j] = d;
                test_sq[i * nt + j] = (ni + tr_norm[j] - 2.0 * d).max(0.0);
            }
        }
        Ok(Self {
            train_rows: nt,
            test_targets: test_idx.iter().map(|&i| r[i]).collect(),
            train_targets: train_idx.iter().map(|&i| r[i]).collect(),
            train_dot,
            train_sq,
            test_dot,
            test_sq,
        })
    }

    fn held_out_mae(&self, point: &GridPoint, tol: f64) -> f64 {
        let nt = self.train_rows;
        let k = &point.kernel;
        let values = self
            .train_dot
            .iter()
            .zip(&self.train_sq)
            .map(|(&d, &s)| k.from_parts(d, s))
            .collect();
        let km = KernelMatrix::new(nt, values);
        let sol = smo::solve(
            &km,
            &self.train_targets,
            point.c,
            point.epsilon,
            tol,
            smo::max_iterations(nt),
        );
        let mut abs_err = 0.0;
        for (i, &t) in self.test_targets.iter().enumerate() {
            let row = i * nt..(i + 1) * nt;
            let p: f64 = self.test_dot[row.clone()]
                .iter()
                .zip(&self.test_sq[row])
                .zip(&sol.beta)
                .map(|((&d, &s), &b)| if b == 0.0 { 0.0 } else { b * k.from_parts(d, s) })
                .sum::<f64>()
                + sol.bias;
            abs_err += (p - t).abs();
        }
        abs_err / self.test_targets.len() as f64
    }
}

/// Cross-validated grid search over the grid expanded for `x.cols()`
/// features, followed by a refit on all rows at the best point.
pub fn grid_search(x: &FeatureMatrix, r: &[f64], grid: &SvrGrid) -> Result<GridSearchOutcome> {
    grid_search_points(x, r, &grid.points(x.cols()), grid.folds, grid.tol)
}

/// Evaluates every point by mean held-out MAE over contiguous folds. Each
/// fold is standardized with its training rows only. Ties in mean MAE go to
/// the earlier point.
pub fn grid_search_points(
    x: &FeatureMatrix,
    r: &[f64],
    points: &[GridPoint],
    folds: usize,
    tol: f64,
) -> Result<GridSearchOutcome> {
    if points.is_empty() {
        return Err(Error::InvalidArgument("empty hyperparameter grid".into()));
    }
    if x.rows() != r.len() {
        return Err(Error::Shape(format!("{} rows vs {} targets", x.rows(), r.len())));
    }
    for p in points {
        p.params(tol).validate()?;
    }
    let ranges = fold_ranges(x.rows(), folds)?;
    if ranges.iter().any(|f| x.rows() - f.len() < 2) {
        return Err(Error::InvalidArgument(
            "each training fold needs at least 2 samples".into(),
        ));
    }
    let caches: Vec<FoldCache> = ranges
        .into_par_iter()
        .map(|f| FoldCache::build(x, r, f))
        .collect::<Result<_>>()?;
    let maes: Vec<f64> = (0..points.len() * folds)
        .into_par_iter()
        .map(|t| caches[t % folds].held_out_mae(&points[t / folds], tol))
        .collect();
    let tried: Vec<GridRow> = points
        .iter()
        .zip(maes.chunks(folds))
        .map(|(&point, fold_maes)| GridRow {
            point,
            mean_mae: fold_maes.iter().sum::<f64>() / folds as f64,
            fold_maes: fold_maes.to_vec(),
        })
        .collect();
    let mut best = 0;
    for (i, row) in tried.iter().enumerate() {
        if row.mean_mae < tried[best].mean_mae {
            best = i;
        }
    }
    let scaler = Standardizer::fit(x)?;
    let model = fit_svr(&scaler.apply(x)?, r, &tried[best].point.params(tol))?;
    Ok(GridSearchOutcome {
        report: GridSearchReport { tried, best },
        scaler,
        model,
    })
}

#[derive(Debug, Clone)]
pub struct LengthSearch {
    /// Chosen number of top-ranked features.
    pub length: usize,
    /// Grid report for each candidate length, ascending.
    pub per_length: Vec<(usize, GridSearchReport)>,
    /// Grid search outcome at the chosen length.
    pub outcome: GridSearchOutcome,
}

impl LengthSearch {
    pub fn best_mae(&self, length: usize) -> Option<f64> {
        self.per_length
            .iter()
            .find(|(l, _)| *l == length)
            .map(|(_, rep)| rep.best_row().mean_mae)
    }
}

/// Runs [`grid_search`] on the top-`L` ranked features for every candidate
/// `L` and keeps the length with the lowest best CV MAE (ties go to the
/// smaller length).
pub fn select_feature_length(
    ranked: &SelectionResult,
    x: &FeatureMatrix,
    r: &[f64],
    lengths: &[usize],
    grid: &SvrGrid,
) -> Result<LengthSearch> {
    let mut lengths = lengths.to_vec();
    lengths.sort_unstable();
    lengths.dedup();
    if lengths.is_empty() {
        return Err(Error::InvalidArgument("empty feature length grid".into()));
    }
    if let Some(&bad) = lengths.iter().find(|&&l| l == 0 || l > ranked.len() || l > x.cols()) {
        return Err(Error::InvalidArgument(format!(
            "feature length {bad} outside [1, {}]",
            ranked.len().min(x.cols())
        )));
    }
    let mut per_length = Vec::with_capacity(lengths.len());
    let mut best: Option<(usize, f64, GridSearchOutcome)> = None;
    for &l in &lengths {
        let xl = x.select_columns(ranked.top(l)?)?;
        let outcome = grid_search(&xl, r, grid)?;
        let mae = outcome.report.best_row().mean_mae;
        log::info!("feature length {l}: best CV MAE {mae:.6}");
        per_length.push((l, outcome.report.clone()));
        if best.as_ref().is_none_or(|(_, b, _)| mae < *b) {
            best = Some((l, mae, outcome));
        }
    }
    let (length, _, outcome) = best.expect("nonempty lengths");
    Ok(LengthSearch {
        length,
        per_length,
        outcome,
    })
}
