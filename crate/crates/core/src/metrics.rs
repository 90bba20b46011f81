//! Regression agreement measures. Moments use the population (1/N) convention.

use crate::{Error, Result};

fn check_pair(pred: &[f64], truth: &[f64], min_len: usize) -> Result<()> {
    if pred.len() != truth.len() {
        return Err(Error::Shape(format!(
            "{} predictions vs {} truth values",
            pred.len(),
            truth.len()
        )));
    }
    if pred.len() < min_len {
        return Err(Error::InvalidArgument(format!(
            "metric needs at least {min_len} samples, got {}",
            pred.len()
        )));
    }
    Ok(())
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// Population means, variances and covariance.
fn moments(pred: &[f64], truth: &[f64]) -> (f64, f64, f64, f64, f64) {
    let (mp, mt) = (mean(pred), mean(truth));
    let n = pred.len() as f64;
    let (mut vp, mut vt, mut cov) = (0.0, 0.0, 0.0);
    for (&p, &t) in pred.iter().zip(truth) {
        let (dp, dt) = (p - mp, t - mt);
        vp += dp * dp;
        vt += dt * dt;
        cov += dp * dt;
    }
    (mp, mt, vp / n, vt / n, cov / n)
}

pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 1)?;
    let sq: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sq / pred.len() as f64).sqrt())
}

pub fn mae(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 1)?;
    let s: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t).abs()).sum();
    Ok(s / pred.len() as f64)
}

/// Pearson's correlation. A constant series yields [`Error::Undefined`].
pub fn pearson_cc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    let (_, _, vp, vt, cov) = moments(pred, truth);
    if vp == 0.0 || vt == 0.0 {
        return Err(Error::Undefined("correlation of a constant series".into()));
    }
    Ok((cov / (vp.sqrt() * vt.sqrt())).clamp(-1.0, 1.0))
}

/// Lin's concordance correlation. Two equal constant series give 1.
pub fn lin_ccc(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check_pair(pred, truth, 2)?;
    let (mp, mt, vp, vt, cov) = moments(pred, truth);
    let denom = vp + vt + (mp - mt) * (mp - mt);
    if denom == 0.0 {
        return Ok(1.0);
    }
    Ok((2.0 * cov / denom).clamp(-1.0, 1.0))
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvalReport {
    pub n: usize,
    pub rmse: f64,
    pub mae: f64,
    /// `None` when either series is constant.
    pub cc: Option<f64>,
    pub ccc: f64,
}

impl EvalReport {
    pub fn compute(pred: &[f64], truth: &[f64]) -> Result<Self> {
        check_pair(pred, truth, 2)?;
        let cc = match pearson_cc(pred, truth) {
            Ok(v) => Some(v),
            Err(Error::Undefined(_)) => None,
            Err(e) => return Err(e),
        };
        Ok(Self {
            n: pred.len(),
            rmse: rmse(pred, truth)?,
            mae: mae(pred, truth)?,
            cc,
            ccc: lin_ccc(pred, truth)?,
        })
    }

    pub const CSV_HEADER: &'static str = "n,rmse,mae,cc,ccc";

    /// `n,rmse,mae,cc,ccc`; an undefined CC is written as `undefined`.
    pub fn csv_row(&self) -> String {
        let cc = self.cc.map_or_else(|| "undefined".to_string(), |v| format!("{v:.6}"));
        format!("{},{:.6},{:.6},{cc},{:.6}", self.n, self.rmse, self.mae, self.ccc)
    }
}
