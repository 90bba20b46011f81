//! SMO solver for the epsilon-SVR dual.
//!
//! The dual is solved in its 2n-variable form: for sample `i`, variable `i`
//! carries `alpha_i` (label +1, linear term `eps - r_i`) and variable `n + i`
//! carries `alpha*_i` (label -1, linear term `eps + r_i`). With
//! `Q_st = y_s y_t K(s mod n, t mod n)` the problem is
//!
//! ```text
//! min 1/2 a'Qa + p'a   s.t.  y'a = 0,  0 <= a <= C
//! ```
//!
//! Working pairs are chosen by maximal violation for the first index and
//! second-order gain for the second, as in libsvm.

const TAU: f64 = 1e-12;

/// Row-major symmetric n x n kernel matrix.
#[derive(Debug, Clone)]
pub struct KernelMatrix {
    n: usize,
    values: Vec<f64>,
}

impl KernelMatrix {
    pub fn new(n: usize, values: Vec<f64>) -> Self {
        assert_eq!(values.len(), n * n, "kernel matrix size");
        Self { n, values }
    }

    pub fn n(&self) -> usize {
        self.n
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.values[i * self.n..(i + 1) * self.n]
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.values[i * self.n + j]
    }
}

#[derive(Debug, Clone)]
pub struct DualSolution {
    /// `beta_i = alpha_i - alpha*_i`, one per sample.
    pub beta: Vec<f64>,
    pub bias: f64,
    pub iterations: usize,
    pub converged: bool,
}

/// Iteration cap for `n` samples: `max(10^7, 100 * 2n)` pair updates.
pub fn max_iterations(n: usize) -> usize {
    (200 * n).max(10_000_000)
}

pub fn solve(k: &KernelMatrix, r: &[f64], c: f64, eps: f64, tol: f64, max_iter: usize) -> DualSolution {
    let n = k.n();
    assert_eq!(r.len(), n);
    let l = 2 * n;
    let y: Vec<f64> = (0..l).map(|s| if s < n { 1.0 } else { -1.0 }).collect();
    let mut alpha = vec![0.0f64; l];
    // gradient of the objective, Q alpha + p, starting from alpha = 0
    let mut grad: Vec<f64> = (0..l)
        .map(|s| if s < n { eps - r[s] } else { eps + r[s - n] })
        .collect();
    let qd: Vec<f64> = (0..l).map(|s| k.get(s % n, s % n)).collect();
    let upper = |a: f64| a >= c;
    let lower = |a: f64| a <= 0.0;

    let mut iterations = 0;
    let mut converged = false;
    while iterations < max_iter {
        // first index: maximal violation
        let mut gmax = f64::NEG_INFINITY;
        let mut i = usize::MAX;
        for s in 0..l {
            let v = if y[s] > 0.0 {
                if upper(alpha[s]) {
                    continue;
                }
                -grad[s]
            } else {
                if lower(alpha[s]) {
                    continue;
                }
                grad[s]
            };
            if v > gmax {
                gmax = v;
                i = s;
            }
        }
        if i == usize::MAX {
            converged = true;
            break;
        }
        // second index: largest second-order decrease
        let ki = k.row(i % n);
        let mut gmax2 = f64::NEG_INFINITY;
        let mut j = usize::MAX;
        let mut obj_min = f64::INFINITY;
        for t in 0..l {
            let q_it = y[i] * y[t] * ki[t % n];
            let (v, grad_diff, quad) = if y[t] > 0.0 {
                if lower(alpha[t]) {
                    continue;
                }
                (grad[t], gmax + grad[t], qd[i] + qd[t] - 2.0 * y[i] * q_it)
            } else {
                if upper(alpha[t]) {
                    continue;
                }
                (-grad[t], gmax - grad[t], qd[i] + qd[t] + 2.0 * y[i] * q_it)
            };
            if v > gmax2 {
                gmax2 = v;
            }
            if grad_diff > 0.0 {
                let quad = if quad > 0.0 { quad } else { TAU };
                let obj = -(grad_diff * grad_diff) / quad;
                if obj < obj_min {
                    obj_min = obj;
                    j = t;
                }
            }
        }
        if gmax + gmax2 < tol || j == usize::MAX {
            converged = true;
            break;
        }
        iterations += 1;

        let q_ij = y[i] * y[j] * ki[j % n];
        let (old_i, old_j) = (alpha[i], alpha[j]);
        if y[i] != y[j] {
            let quad = positive(qd[i] + qd[j] + 2.0 * q_ij);
            let delta = (-grad[i] - grad[j]) / quad;
            let diff = alpha[i] - alpha[j];
            alpha[i] += delta;
            alpha[j] += delta;
            if diff > 0.0 {
                if alpha[j] < 0.0 {
                    alpha[j] = 0.0;
                    alpha[i] = diff;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = -diff;
            }
            if diff > 0.0 {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = c - diff;
                }
            } else if alpha[j] > c {
                alpha[j] = c;
                alpha[i] = c + diff;
            }
        } else {
            let quad = positive(qd[i] + qd[j] - 2.0 * q_ij);
            let delta = (grad[i] - grad[j]) / quad;
            let sum = alpha[i] + alpha[j];
            alpha[i] -= delta;
            alpha[j] += delta;
            if sum > c {
                if alpha[i] > c {
                    alpha[i] = c;
                    alpha[j] = sum - c;
                }
            } else if alpha[j] < 0.0 {
                alpha[j] = 0.0;
                alpha[i] = sum;
            }
            if sum > c {
                if alpha[j] > c {
                    alpha[j] = c;
                    alpha[i] = sum - c;
                }
            } else if alpha[i] < 0.0 {
                alpha[i] = 0.0;
                alpha[j] = sum;
            }
        }

        let (di, dj) = (alpha[i] - old_i, alpha[j] - old_j);
        let kj = k.row(j % n);
        let (yi_di, yj_dj) = (y[i] * di, y[j] * dj);
        for s in 0..l {
            let m = s % n;
            grad[s] += y[s] * (yi_di * ki[m] + yj_dj * kj[m]);
        }
    }

    // bias from free variables, else midpoint of the feasible interval
    let (mut ub, mut lb) = (f64::INFINITY, f64::NEG_INFINITY);
    let (mut free, mut sum_free) = (0usize, 0.0);
    for s in 0..l {
        let yg = y[s] * grad[s];
        if upper(alpha[s]) {
            if y[s] < 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else if lower(alpha[s]) {
            if y[s] > 0.0 {
                ub = ub.min(yg);
            } else {
                lb = lb.max(yg);
            }
        } else {
            free += 1;
            sum_free += yg;
        }
    }
    let rho = if free > 0 {
        sum_free / free as f64
    } else {
        (ub + lb) / 2.0
    };

    DualSolution {
        beta: (0..n).map(|i| alpha[i] - alpha[n + i]).collect(),
        bias: -rho,
        iterations,
        converged,
    }
}

fn positive(q: f64) -> f64 {
    if q > 0.0 {
        q
    } else {
        TAU
    }
}
