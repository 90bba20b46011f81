//! Histogram mutual information and minimum-redundancy maximum-relevance
//! feature ranking.
//!
//! Ratings are discretized into equal-width levels over `[-1, 1]`; feature
//! columns into equal-frequency (quantile) bins. MI is reported in nats.

mod windows;

use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rayon::prelude::*;

use crate::{Error, FeatureMatrix, Result};

pub use windows::{select_frames, FrameWindow, FrameWindowSet, WINDOW_AGREEMENT, WINDOW_LEN};

pub const DEFAULT_BINS: usize = 10;
pub const RATING_RANGE: (f64, f64) = (-1.0, 1.0);

/// A sequence of bin levels with the bin edges that produced them.
#[derive(Debug, Clone, PartialEq)]
pub struct DiscretizedSeries {
    levels: Vec<usize>,
    edges: Vec<f64>,
}

impl DiscretizedSeries {
    /// Builds a series directly from levels, with unit-spaced edges.
    pub fn from_levels(levels: Vec<usize>, bins: usize) -> Result<Self> {
        if bins == 0 {
            return Err(Error::InvalidArgument("need at least one bin".into()));
        }
        if let Some(&bad) = levels.iter().find(|&&l| l >= bins) {
            return Err(Error::InvalidArgument(format!(
                "level {bad} out of range for {bins} bins"
            )));
        }
        Ok(Self {
            levels,
            edges: (0..=bins).map(|i| i as f64).collect(),
        })
    }

    pub fn levels(&self) -> &[usize] {
        &self.levels
    }

    pub fn edges(&self) -> &[f64] {
        &self.edges
    }

    pub fn bins(&self) -> usize {
        self.edges.len() - 1
    }

    pub fn len(&self) -> usize {
        self.levels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.levels.is_empty()
    }

    fn counts(&self) -> Vec<usize> {
        let mut c = vec![0; self.bins()];
        for &l in &self.levels {
            c[l] += 1;
        }
        c
    }
}

fn check_values(values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidArgument("cannot discretize an empty series".into()));
    }
    if values.iter().any(|v| v.is_nan()) {
        return Err(Error::InvalidArgument("cannot discretize NaN".into()));
    }
    Ok(())
}

/// Equal-width bins over `[lo, hi]`; values outside are clamped into the end bins.
pub fn discretize(values: &[f64], bins: usize, lo: f64, hi: f64) -> Result<DiscretizedSeries> {
    check_values(values)?;
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    if lo.partial_cmp(&hi) != Some(std::cmp::Ordering::Less) || !lo.is_finite() || !hi.is_finite() {
        return Err(Error::InvalidArgument(format!("invalid range [{lo}, {hi}]")));
    }
    let span = hi - lo;
    let levels = values
        .iter()
        .map(|&x| {
            let pos = (x - lo) * bins as f64 / span;
            if pos <= 0.0 {
                0
            } else {
                (pos.floor() as usize).min(bins - 1)
            }
        })
        .collect();
    let edges = (0..=bins).map(|i| lo + span * i as f64 / bins as f64).collect();
    Ok(DiscretizedSeries { levels, edges })
}

/// Equal-frequency bins. Cut points are taken at sorted positions
/// `floor(k n / bins)`; repeated cuts collapse, so heavily tied data yields
/// fewer than `bins` levels. Level of `x` = number of cuts `<= x`.
pub fn discretize_quantile(values: &[f64], bins: usize) -> Result<DiscretizedSeries> {
    check_values(values)?;
    if bins < 2 {
        return Err(Error::InvalidArgument(format!("need at least 2 bins, got {bins}")));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let n = sorted.len();
    let (min, max) = (sorted[0], sorted[n - 1]);
    let mut cuts: Vec<f64> = (1..bins).map(|k| sorted[k * n / bins]).filter(|&c| c > min).collect();
    cuts.dedup();
    let levels = values.iter().map(|&x| cuts.partition_point(|&c| c <= x)).collect();
    let mut edges = Vec::with_capacity(cuts.len() + 2);
    edges.push(min);
    edges.extend_from_slice(&cuts);
    let top = *edges.last().unwrap();
    edges.push(if max > top { max } else { nudge_up(top) });
    Ok(DiscretizedSeries { levels, edges })
}

fn nudge_up(x: f64) -> f64 {
    let step = (x.abs() * f64::EPSILON).max(f64::MIN_POSITIVE);
    x + step
}

/// Shannon entropy of the empirical level distribution, in nats.
pub fn entropy(a: &DiscretizedSeries) -> f64 {
    let n = a.len() as f64;
    let mut terms: Vec<f64> = a
        .counts()
        .into_iter()
        .filter(|&c| c > 0)
        .map(|c| {
            let p = c as f64 / n;
            -p * p.ln()
        })
        .collect();
    terms.sort_by(f64::total_cmp);
    terms.iter().sum()
}

/// Joint-histogram mutual information in nats. Cell terms are summed in
/// sorted order so the result is exactly symmetric in its arguments.
pub fn mutual_information(a: &DiscretizedSeries, b: &DiscretizedSeries) -> Result<f64> {
    if a.len() != b.len() {
        return Err(Error::Shape(format!(
            "mutual information of series with {} and {} samples",
            a.len(),
            b.len()
        )));
    }
    if a.is_empty() {
        return Err(Error::InvalidArgument("mutual information of empty series".into()));
    }
    Ok(mi_unchecked(a, b))
}

fn mi_unchecked(a: &DiscretizedSeries, b: &DiscretizedSeries) -> f64 {
    let (ba, bb) = (a.bins(), b.bins());
    let mut joint = vec![0usize; ba * bb];
    for (&i, &j) in a.levels.iter().zip(&b.levels) {
        joint[i * bb + j] += 1;
    }
    let (ca, cb) = (a.counts(), b.counts());
    let n = a.len() as f64;
    let mut terms = Vec::new();
    for i in 0..ba {
        for j in 0..bb {
            let c = joint[i * bb + j];
            if c > 0 {
                let c = c as f64;
                // p_ij ln(p_ij / (p_i p_j)) = (c/n) ln(c n / (c_i c_j))
                terms.push(c / n * (c * n / (ca[i] as f64 * cb[j] as f64)).ln());
            }
        }
    }
    terms.sort_by(f64::total_cmp);
    terms.iter().sum::<f64>().max(0.0)
}

/// Ranked picks with the criterion value each had when chosen.
#[derive(Debug, Clone, PartialEq)]
pub struct SelectionResult {
    pub ranked_indices: Vec<usize>,
    /// Criterion value at the iteration each index was picked.
    pub scores: Vec<f64>,
    /// MI with the rating of each picked feature.
    pub relevance: Vec<f64>,
}

impl SelectionResult {
    pub const HEADER: &'static str = "rank,feature_index,score,relevance";

    pub fn len(&self) -> usize {
        self.ranked_indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.ranked_indices.is_empty()
    }

    /// The first `length` picked feature indices.
    pub fn top(&self, length: usize) -> Result<&[usize]> {
        self.ranked_indices.get(..length).ok_or_else(|| {
            Error::InvalidArgument(format!(
                "requested top {length} features but only {} were ranked",
                self.len()
            ))
        })
    }

    pub fn to_text(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for (r, ((i, sc), rel)) in self
            .ranked_indices
            .iter()
            .zip(&self.scores)
            .zip(&self.relevance)
            .enumerate()
        {
            let _ = writeln!(s, "{},{i},{sc},{rel}", r + 1);
        }
        s
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text).map_err(|m| Error::format(path, m))
    }

    fn parse(text: &str) -> std::result::Result<Self, String> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(Self::HEADER) {
            return Err(format!("expected header {:?}", Self::HEADER));
        }
        let mut out = SelectionResult {
            ranked_indices: Vec::new(),
            scores: Vec::new(),
            relevance: Vec::new(),
        };
        for (n, line) in lines.enumerate().filter(|(_, l)| !l.trim().is_empty()) {
            let bad = || format!("line {}: malformed selection row {line:?}", n + 2);
            let f: Vec<&str> = line.split(',').map(str::trim).collect();
            if f.len() != 4 {
                return Err(bad());
            }
            let rank: usize = f[0].parse().map_err(|_| bad())?;
            if rank != out.len() + 1 {
                return Err(format!("line {}: rank {rank} out of sequence", n + 2));
            }
            let idx: usize = f[1].parse().map_err(|_| bad())?;
            if out.ranked_indices.contains(&idx) {
                return Err(format!("line {}: feature {idx} ranked twice", n + 2));
            }
            out.ranked_indices.push(idx);
            out.scores.push(f[2].parse().map_err(|_| bad())?);
            out.relevance.push(f[3].parse().map_err(|_| bad())?);
        }
        Ok(out)
    }
}

/// Discretizes every column of `features` into `bins` quantile bins.
pub fn discretize_columns(features: &FeatureMatrix, bins: usize) -> Result<Vec<DiscretizedSeries>> {
    if features.rows() == 0 {
        return Err(Error::InvalidArgument("no selection frames".into()));
    }
    (0..features.cols())
        .into_par_iter()
        .map(|j| discretize_quantile(&features.column(j), bins))
        .collect()
}

/// Greedy mRMR: the first pick maximizes relevance `MI(R, F_i)`; pick `m + 1`
/// maximizes `MI(R, F_i) - (1/m) sum_{j picked} MI(F_i, F_j)`. Ties go to the
/// lower feature index.
pub fn rank_mrmr(features: &[DiscretizedSeries], ratings: &DiscretizedSeries, k: usize) -> Result<SelectionResult> {
    if k == 0 {
        return Err(Error::InvalidArgument("k must be positive".into()));
    }
    if k > features.len() {
        return Err(Error::InvalidArgument(format!(
            "cannot rank {k} of {} features",
            features.len()
        )));
    }
    if ratings.is_empty() {
        return Err(Error::InvalidArgument("no selection frames".into()));
    }
    if let Some((i, f)) = features.iter().enumerate().find(|(_, f)| f.len() != ratings.len()) {
        return Err(Error::Shape(format!(
            "feature {i} has {} samples, ratings have {}",
            f.len(),
            ratings.len()
        )));
    }
    let relevance: Vec<f64> = features.par_iter().map(|f| mi_unchecked(ratings, f)).collect();
    let mut redundancy = vec![0.0; features.len()];
    let mut picked = vec![false; features.len()];
    let mut out = SelectionResult {
        ranked_indices: Vec::with_capacity(k),
        scores: Vec::with_capacity(k),
        relevance: Vec::with_capacity(k),
    };
    for m in 0..k {
        let mut best: Option<(usize, f64)> = None;
        for i in (0..features.len()).filter(|&i| !picked[i]) {
            let score = if m == 0 {
                relevance[i]
            } else {
                relevance[i] - redundancy[i] / m as f64
            };
            if best.is_none_or(|(_, b)| score > b) {
                best = Some((i, score));
            }
        }
        let (i, score) = best.expect("k <= feature count");
        picked[i] = true;
        out.ranked_indices.push(i);
        out.scores.push(score);
        out.relevance.push(relevance[i]);
        if m + 1 < k {
            let last = &features[i];
            redundancy
                .par_iter_mut()
                .enumerate()
                .filter(|(j, _)| !picked[*j])
                .for_each(|(j, r)| *r += mi_unchecked(&features[j], last));
        }
    }
    Ok(out)
}

/// Discretizes `features` (quantile) and `ratings` (equal-width over
/// `[-1, 1]`) with `bins` levels each, then ranks the top `k` by mRMR.
pub fn rank_features(features: &FeatureMatrix, ratings: &[f64], k: usize, bins: usize) -> Result<SelectionResult> {
    if features.rows() != ratings.len() {
        return Err(Error::Shape(format!(
            "{} feature rows vs {} ratings",
            features.rows(),
            ratings.len()
        )));
    }
    let cols = discretize_columns(features, bins)?;
    let r = discretize(ratings, bins, RATING_RANGE.0, RATING_RANGE.1)?;
    rank_mrmr(&cols, &r, k)
}
