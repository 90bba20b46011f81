//! Direct-summation mutual information and a step-by-step mRMR oracle.

use std::collections::BTreeMap;

use instaffect::mrmr::{rank_mrmr, DiscretizedSeries};
use rand::seq::SliceRandom;
use rand::Rng;

use super::rng;

/// `sum p(i,j) ln(p(i,j) / (p(i) p(j)))` from the empirical joint table.
pub fn mi_oracle(a: &[usize], b: &[usize]) -> f64 {
    assert_eq!(a.len(), b.len());
    let n = a.len() as f64;
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut pa: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pb: BTreeMap<usize, f64> = BTreeMap::new();
    for (&x, &y) in a.iter().zip(b) {
        *joint.entry((x, y)).or_default() += 1.0 / n;
        *pa.entry(x).or_default() += 1.0 / n;
        *pb.entry(y).or_default() += 1.0 / n;
    }
    joint.iter().map(|(&(x, y), &p)| p * (p / (pa[&x] * pb[&y])).ln()).sum()
}

pub fn entropy_oracle(a: &[usize]) -> f64 {
    let n = a.len() as f64;
    let mut counts: BTreeMap<usize, f64> = BTreeMap::new();
    for &x in a {
        *counts.entry(x).or_default() += 1.0;
    }
    -counts.values().map(|c| c / n * (c / n).ln()).sum::<f64>()
}

/// Expands a joint count table into paired level sequences.
pub fn series_from_table(table: &[&[usize]]) -> (Vec<usize>, Vec<usize>) {
    let (mut a, mut b) = (Vec::new(), Vec::new());
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            a.extend(std::iter::repeat_n(i, c));
            b.extend(std::iter::repeat_n(j, c));
        }
    }
    (a, b)
}

/// Hand-evaluated MI of a table: each cell term written out.
pub fn table_mi(table: &[&[usize]]) -> f64 {
    let n: usize = table.iter().flat_map(|r| r.iter()).sum();
    let n = n as f64;
    let rows: Vec<f64> = table.iter().map(|r| r.iter().sum::<usize>() as f64 / n).collect();
    let cols: Vec<f64> = (0..table[0].len())
        .map(|j| table.iter().map(|r| r[j]).sum::<usize>() as f64 / n)
        .collect();
    let mut mi = 0.0;
    for (i, row) in table.iter().enumerate() {
        for (j, &c) in row.iter().enumerate() {
            if c > 0 {
                let p = c as f64 / n;
                mi += p * (p / (rows[i] * cols[j])).ln();
            }
        }
    }
    mi
}

pub fn fixed_tables() -> Vec<Vec<Vec<usize>>> {
    vec![
        vec![vec![2, 1], vec![1, 2]],
        vec![vec![5, 0], vec![0, 5]],
        vec![vec![3, 3], vec![3, 3]],
        vec![vec![4, 1, 0], vec![0, 2, 3], vec![1, 0, 6]],
        vec![vec![1, 2, 3, 4], vec![4, 3, 2, 1]],
        vec![vec![7, 0], vec![0, 0], vec![2, 5]],
        vec![vec![1]],
    ]
}

pub fn series(levels: &[usize], bins: usize) -> DiscretizedSeries {
    DiscretizedSeries::from_levels(levels.to_vec(), bins).unwrap()
}

/// Greedy incremental criterion evaluated from scratch at every step, picking
/// the lowest index among candidates within `1e-12` of the step maximum.
pub fn mrmr_oracle(features: &[Vec<usize>], ratings: &[usize], k: usize) -> Vec<(usize, f64)> {
    let rel: Vec<f64> = features.iter().map(|f| mi_oracle(f, ratings)).collect();
    let mut picked: Vec<usize> = Vec::new();
    let mut out = Vec::new();
    for _ in 0..k {
        let scores: Vec<Option<f64>> = (0..features.len())
            .map(|i| {
                if picked.contains(&i) {
                    return None;
                }
                let red = if picked.is_empty() {
                    0.0
                } else {
                    picked
                        .iter()
                        .map(|&j| mi_oracle(&features[i], &features[j]))
                        .sum::<f64>()
                        / picked.len() as f64
                };
                Some(rel[i] - red)
            })
            .collect();
        let best = scores.iter().flatten().cloned().fold(f64::NEG_INFINITY, f64::max);
        let i = scores
            .iter()
            .position(|s| s.is_some_and(|s| s >= best - 1e-12))
            .unwrap();
        picked.push(i);
        out.push((i, scores[i].unwrap()));
    }
    out
}

pub struct MrmrProblem {
    pub features: Vec<Vec<usize>>,
    pub ratings: Vec<usize>,
    pub k: usize,
    /// Columns of two equally relevant, mutually independent informative
    /// features and of an exact copy of the first.
    pub informative: (usize, usize),
    pub duplicate: usize,
}

/// At most 8 features: two independent bits of a 4-level rating, a copy of
/// one of them, and up to 5 noisy or random columns, in shuffled order.
pub fn random_problem(seed: u64) -> MrmrProblem {
    let mut r = rng(seed);
    let quarter = r.gen_range(5..40);
    let mut ratings: Vec<usize> = (0..4 * quarter).map(|i| i % 4).collect();
    ratings.shuffle(&mut r);
    let n = ratings.len();
    let hi: Vec<usize> = ratings.iter().map(|&v| v / 2).collect();
    let lo: Vec<usize> = ratings.iter().map(|&v| v % 2).collect();
    let mut cols = vec![hi.clone(), lo, hi];
    for _ in 0..r.gen_range(0..=5) {
        let bins = r.gen_range(2..6);
        let noisy = r.gen_bool(0.5);
        cols.push(
            (0..n)
                .map(|t| {
                    if noisy && r.gen_bool(0.6) {
                        ratings[t].min(bins - 1)
                    } else {
                        r.gen_range(0..bins)
                    }
                })
                .collect(),
        );
    }
    let mut order: Vec<usize> = (0..cols.len()).collect();
    order.shuffle(&mut r);
    let mut features = vec![Vec::new(); cols.len()];
    for (src, &dst) in order.iter().enumerate() {
        features[dst] = cols[src].clone();
    }
    let k = r.gen_range(1..=features.len());
    MrmrProblem {
        features,
        ratings,
        k,
        informative: (order[0], order[1]),
        duplicate: order[2],
    }
}

pub struct MrmrCheck {
    pub matches_oracle: bool,
    /// `None` when the duplicate pair was not both ranked.
    pub duplicate_demoted: bool,
}

pub fn check_problem(p: &MrmrProblem) -> MrmrCheck {
    let fs: Vec<DiscretizedSeries> = p.features.iter().map(|f| series(f, 6)).collect();
    let rs = series(&p.ratings, 4);
    let got = rank_mrmr(&fs, &rs, p.k).unwrap();
    let want = mrmr_oracle(&p.features, &p.ratings, p.k);
    let matches_oracle = got.ranked_indices.len() == want.len()
        && want
            .iter()
            .zip(got.ranked_indices.iter().zip(&got.scores))
            .all(|(&(i, s), (&gi, &gs))| i == gi && (s - gs).abs() <= 1e-12);

    // full ranking for the demotion check
    let full = rank_mrmr(&fs, &rs, fs.len()).unwrap();
    let pos = |c: usize| full.ranked_indices.iter().position(|&i| i == c).unwrap();
    let (a, b) = p.informative;
    let second_copy = pos(a).max(pos(p.duplicate));
    let duplicate_demoted = second_copy > pos(b);
    MrmrCheck {
        matches_oracle,
        duplicate_demoted,
    }
}
