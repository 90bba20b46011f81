//! Plot data: time, ground truth and prediction per frame.

use std::fmt::Write as _;
use std::path::Path;

use super::corpus::{rating_coverage, read_ratings, resample_ratings};
use super::stages::read_predictions;
use crate::streams::FRAME_RATE;
use crate::{Error, Result};

pub const TRACE_HEADER: &str = "t,truth,prediction";

/// Builds the trace CSV from aligned series; `t = frame / 25`.
pub fn trace_csv(truth: &[f64], pred: &[f64]) -> Result<String> {
    if pred.is_empty() {
        return Err(Error::InvalidArgument("no predictions to trace".into()));
    }
    if truth.len() != pred.len() {
        return Err(Error::Shape(format!(
            "{} ratings vs {} predictions",
            truth.len(),
            pred.len()
        )));
    }
    let mut s = String::with_capacity(32 * pred.len());
    s.push_str(TRACE_HEADER);
    s.push('\n');
    for (i, (t, p)) in truth.iter().zip(pred).enumerate() {
        let _ = writeln!(s, "{},{t},{p}", i as f64 / FRAME_RATE as f64);
    }
    Ok(s)
}

/// Reads a predictions file and a ratings file and aligns them on the 25 fps
/// clock. The ratings must cover exactly as many frames as there are predictions.
pub fn emit_trace(predictions: &Path, ratings: &Path) -> Result<String> {
    let pred = read_predictions(predictions)?;
    if pred.is_empty() {
        return Err(Error::format(predictions, "prediction file holds no rows"));
    }
    let points = read_ratings(ratings)?;
    let coverage = rating_coverage(&points);
    if coverage != pred.len() {
        return Err(Error::Shape(format!(
            "{} covers {coverage} frames but {} holds {} predictions",
            ratings.display(),
            predictions.display(),
            pred.len()
        )));
    }
    let truth = resample_ratings(&points, pred.len()).map_err(|m| Error::format(ratings, m))?;
    trace_csv(&truth, &pred)
}
