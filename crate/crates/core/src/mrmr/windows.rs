//! Low-variation frame windows used as the mRMR selection set.

use super::{discretize, DEFAULT_BINS, RATING_RANGE};
use crate::{Error, Result};

pub const WINDOW_LEN: usize = 50;
/// A window qualifies when at least this share of its frames sit on the modal level.
pub const WINDOW_AGREEMENT: f64 = 0.8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct FrameWindow {
    pub start: usize,
    pub length: usize,
    /// Modal rating level (lowest level on ties).
    pub level: usize,
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct FrameWindowSet {
    /// Accepted windows, sorted by start frame.
    pub windows: Vec<FrameWindow>,
}

impl FrameWindowSet {
    pub fn frame_count(&self) -> usize {
        self.windows.iter().map(|w| w.length).sum()
    }

    /// All frame indices covered, ascending.
    pub fn frame_indices(&self) -> Vec<usize> {
        self.windows.iter().flat_map(|w| w.start..w.start + w.length).collect()
    }
}

fn modal_level(levels: &[usize]) -> (usize, usize) {
    let mut counts = [0usize; DEFAULT_BINS];
    for &l in levels {
        counts[l] += 1;
    }
    let mut best = (0, 0);
    for (l, &c) in counts.iter().enumerate() {
        if c > best.1 {
            best = (l, c);
        }
    }
    best
}

/// Scans 50-frame windows left to right. A window qualifies when at least 80%
/// of its frames share the modal level of ten equal-width rating levels; after
/// a qualifying window the scan jumps past it, otherwise it advances one frame.
/// Qualifying windows are accepted round-robin across levels (ascending level,
/// left to right within a level) until `floor(budget_fraction * T)` frames are
/// covered, with at least one window accepted.
///
/// Returns [`Error::NoQualifyingWindow`] when no window qualifies.
pub fn select_frames(ratings: &[f64], budget_fraction: f64) -> Result<FrameWindowSet> {
    if !(budget_fraction > 0.0 && budget_fraction < 1.0) {
        return Err(Error::InvalidArgument(format!(
            "budget fraction must lie in (0, 1), got {budget_fraction}"
        )));
    }
    if ratings.len() < WINDOW_LEN {
        return Err(Error::InvalidArgument(format!(
            "frame selection needs at least {WINDOW_LEN} frames, got {}",
            ratings.len()
        )));
    }
    let levels = discretize(ratings, DEFAULT_BINS, RATING_RANGE.0, RATING_RANGE.1)?;
    let levels = levels.levels();

    let mut by_level: Vec<Vec<FrameWindow>> = vec![Vec::new(); DEFAULT_BINS];
    let mut start = 0;
    while start + WINDOW_LEN <= levels.len() {
        let (level, count) = modal_level(&levels[start..start + WINDOW_LEN]);
        // count / WINDOW_LEN >= 0.8, in integers
        if count * 5 >= WINDOW_LEN * 4 {
            by_level[level].push(FrameWindow {
                start,
                length: WINDOW_LEN,
                level,
            });
            start += WINDOW_LEN;
        } else {
            start += 1;
        }
    }
    if by_level.iter().all(Vec::is_empty) {
        return Err(Error::NoQualifyingWindow);
    }

    let budget = (budget_fraction * ratings.len() as f64).floor() as usize;
    let max_windows = (budget / WINDOW_LEN).max(1);
    let mut accepted = Vec::new();
    let mut cursor = [0usize; DEFAULT_BINS];
    'rounds: loop {
        let mut progressed = false;
        for (level, queue) in by_level.iter().enumerate() {
            if let Some(&w) = queue.get(cursor[level]) {
                cursor[level] += 1;
                accepted.push(w);
                progressed = true;
                if accepted.len() == max_windows {
                    break 'rounds;
                }
            }
        }
        if !progressed {
            break;
        }
    }
    accepted.sort_by_key(|w| w.start);
    Ok(FrameWindowSet { windows: accepted })
}
