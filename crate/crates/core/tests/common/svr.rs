//! SVR oracles: optimality conditions checked from model predictions, and
//! constructed regression problems with known structure.

use instaffect::svr::{fit_svr, KernelSpec, SvrModel, SvrParams};
use instaffect::FeatureMatrix;
use rand::Rng;

use super::{rng, uniform_vec};

pub fn matrix(rows: usize, cols: usize, data: Vec<f64>) -> FeatureMatrix {
    FeatureMatrix::new(rows, cols, data).unwrap()
}

/// Dual coefficient of every training row (zero for non-support rows).
pub fn full_beta(model: &SvrModel, n: usize) -> Vec<f64> {
    let d = model.diagnostics.as_ref().expect("fitted model carries diagnostics");
    let mut beta = vec![0.0; n];
    for (&i, &b) in d.support_indices.iter().zip(&model.dual_coefs) {
        beta[i] = b;
    }
    beta
}

/// Optimality violations of an epsilon-SVR fit, from its own predictions:
/// box `|beta| <= C`, `sum beta = 0`, and per sample with residual `e = r - f`:
/// `beta = 0 => |e| <= eps + tol`; interior `beta => e = sign(beta) eps` within
/// `tol`; `|beta| = C => sign(beta) e >= eps - tol`.
pub fn kkt_violations(model: &SvrModel, x: &FeatureMatrix, r: &[f64], tol: f64) -> Vec<String> {
    let n = x.rows();
    let beta = full_beta(model, n);
    let (c, eps) = (model.c, model.epsilon);
    let mut out = Vec::new();
    let sum: f64 = beta.iter().sum();
    if sum.abs() > 1e-8 * c.max(1.0) * n as f64 {
        out.push(format!("sum beta = {sum}"));
    }
    for i in 0..n {
        let b = beta[i];
        let e = r[i] - model.predict(x.row(i)).unwrap();
        let bound = c * (1.0 - 1e-9);
        let ok = if b.abs() > c * (1.0 + 1e-9) {
            false
        } else if b == 0.0 {
            e.abs() <= eps + tol
        } else if b.abs() >= bound {
            b.signum() * e >= eps - tol
        } else {
            (e - b.signum() * eps).abs() <= tol
        };
        if !ok {
            out.push(format!("sample {i}: beta {b}, residual {e}"));
        }
    }
    out
}

pub struct RandomProblem {
    pub x: FeatureMatrix,
    pub r: Vec<f64>,
    pub params: SvrParams,
}

pub fn random_problem(seed: u64) -> RandomProblem {
    let mut g = rng(seed);
    let n = g.gen_range(5..=200);
    let d = g.gen_range(1..=6);
    let x = uniform_vec(&mut g, n * d, -1.0, 1.0);
    let w = uniform_vec(&mut g, d, -1.0, 1.0);
    let r: Vec<f64> = (0..n)
        .map(|i| {
            let row = &x[i * d..(i + 1) * d];
            let lin: f64 = row.iter().zip(&w).map(|(a, b)| a * b).sum();
            (lin + 0.5 * (3.0 * row[0]).sin() + g.gen_range(-0.1..0.1)).clamp(-1.0, 1.0)
        })
        .collect();
    let kernel = match g.gen_range(0..3) {
        0 => KernelSpec::Linear,
        1 => KernelSpec::Polynomial {
            degree: g.gen_range(2..=3),
            coef: 1.0,
        },
        _ => KernelSpec::Rbf {
            gamma: 2f64.powi(g.gen_range(-2..=2)) / d as f64,
        },
    };
    let c = [0.1, 1.0, 10.0][g.gen_range(0..3)];
    let eps = [0.01, 0.05, 0.1][g.gen_range(0..3)];
    RandomProblem {
        x: matrix(n, d, x),
        r,
        params: SvrParams::new(kernel, c, eps),
    }
}

/// Fits 50 random problems and returns the total violation count with a
/// sample of messages.
pub fn kkt_sweep(tol: f64) -> (usize, Vec<String>) {
    let mut total = 0;
    let mut msgs = Vec::new();
    for seed in 0..50 {
        let p = random_problem(1000 + seed);
        let model = fit_svr(&p.x, &p.r, &p.params.with_tol(tol)).unwrap();
        let v = kkt_violations(&model, &p.x, &p.r, tol);
        total += v.len();
        msgs.extend(
            v.into_iter()
                .take(2)
                .map(|m| format!("problem {seed} {:?}: {m}", p.params.kernel)),
        );
    }
    (total, msgs)
}

/// Test MAE of a linear SVR (C=10, eps=0.01) trained on 50 noiseless samples
/// of a linear function.
pub fn linear_recovery_mae(seed: u64) -> f64 {
    let mut g = rng(seed);
    let d = 3;
    let w = [0.4, -0.25, 0.3];
    let b = 0.05;
    let f = |row: &[f64]| row.iter().zip(&w).map(|(a, c)| a * c).sum::<f64>() + b;
    let train = uniform_vec(&mut g, 50 * d, -1.0, 1.0);
    let test = uniform_vec(&mut g, 200 * d, -1.0, 1.0);
    let r: Vec<f64> = train.chunks(d).map(f).collect();
    let model = fit_svr(
        &matrix(50, d, train),
        &r,
        &SvrParams::new(KernelSpec::Linear, 10.0, 0.01),
    )
    .unwrap();
    let err: f64 = test
        .chunks(d)
        .map(|row| (model.predict(row).unwrap() - f(row)).abs())
        .sum();
    err / 200.0
}

pub fn two_point() -> (FeatureMatrix, Vec<f64>, SvrParams) {
    (
        matrix(2, 1, vec![0.0, 1.0]),
        vec![0.0, 1.0],
        SvrParams::new(KernelSpec::Linear, 1000.0, 0.1),
    )
}

/// Minimum eigenvalue of an RBF Gram matrix over random points.
pub fn rbf_min_eigenvalue(seed: u64, n: usize, d: usize, gamma: f64) -> f64 {
    let mut g = rng(seed);
    let x = uniform_vec(&mut g, n * d, -2.0, 2.0);
    let spec = KernelSpec::Rbf { gamma };
    let k = nalgebra::DMatrix::from_fn(n, n, |i, j| {
        instaffect::svr::kernel_eval(&spec, &x[i * d..(i + 1) * d], &x[j * d..(j + 1) * d]).unwrap()
    });
    k.symmetric_eigenvalues().min()
}
