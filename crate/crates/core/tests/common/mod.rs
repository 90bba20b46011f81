//! Independent oracles shared by the integration tests and the acceptance suite.
#![allow(dead_code)]

pub mod grad;
pub mod mi;
pub mod svr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn uniform_vec(rng: &mut ChaCha8Rng, n: usize, lo: f64, hi: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(lo..hi)).collect()
}

/// Largest elementwise `|a - b| / max(|a|, |b|)`, with pairs below `floor` in
/// both magnitudes treated as agreeing.
pub fn max_rel_err(a: &[f64], b: &[f64], floor: f64) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x.abs().max(y.abs());
            if d < floor {
                0.0
            } else {
                (x - y).abs() / d
            }
        })
        .fold(0.0, f64::max)
}

/// One line per acceptance criterion, written past the test harness capture.
pub fn report(criterion: &str, pass: bool, detail: &str) {
    use std::io::Write;
    let status = if pass { "PASS" } else { "FAIL" };
    let _ = writeln!(std::io::stderr(), "[acceptance] {status} {criterion}: {detail}");
}

/// `(computed, expected)` for the worked metric examples: RMSE of [3,4] vs
/// [0,0], CC of [1,2,3] vs [1,3,2], CCC of [2,3,4] vs [1,2,3], MAE of [1,-1]
/// vs [0,0].
pub fn metric_worked_values() -> [(f64, f64); 4] {
    use instaffect::metrics::{lin_ccc, mae, pearson_cc, rmse};
    [
        (rmse(&[3.0, 4.0], &[0.0, 0.0]).unwrap(), 12.5f64.sqrt()),
        (pearson_cc(&[1.0, 2.0, 3.0], &[1.0, 3.0, 2.0]).unwrap(), 0.5),
        (lin_ccc(&[2.0, 3.0, 4.0], &[1.0, 2.0, 3.0]).unwrap(), 4.0 / 7.0),
        (mae(&[1.0, -1.0], &[0.0, 0.0]).unwrap(), 1.0),
    ]
}
