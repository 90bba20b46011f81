use crate::{Error, Result, Scalar, Tensor};

/// Cross-channel local response normalization:
/// `out[c] = in[c] / (k + alpha / n * sum_{c' near c} in[c']^2)^beta`,
/// with the neighborhood of `n` channels centred on `c` and clipped at the edges.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct LrnSpec {
    pub neighborhood: usize,
    pub k: f64,
    pub alpha: f64,
    pub beta: f64,
}

impl Default for LrnSpec {
    fn default() -> Self {
        Self {
            neighborhood: 5,
            k: 2.0,
            alpha: 1e-4,
            beta: 0.75,
        }
    }
}

impl LrnSpec {
    pub fn validate(&self) -> Result<()> {
        if self.neighborhood == 0 || self.neighborhood.is_multiple_of(2) {
            return Err(Error::InvalidArgument(format!(
                "LRN neighborhood must be a positive odd channel count, got {}",
                self.neighborhood
            )));
        }
        if !(self.k >= 0.0 && self.alpha > 0.0 && self.beta > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "LRN needs k >= 0, alpha > 0, beta > 0; got k={} alpha={} beta={}",
                self.k, self.alpha, self.beta
            )));
        }
        Ok(())
    }

    fn span(&self, c: usize, channels: usize) -> std::ops::Range<usize> {
        let half = self.neighborhood / 2;
        c.saturating_sub(half)..(c + half + 1).min(channels)
    }
}

fn layout(shape: &[usize]) -> Result<(usize, usize)> {
    if shape.len() < 2 {
        return Err(Error::Shape(format!(
            "LRN needs a channel dimension followed by spatial dims, got {shape:?}"
        )));
    }
    Ok((shape[0], shape[1..].iter().product()))
}

/// Per-position denominators base `k + alpha/n * sum sq`, laid out like the input.
fn denominators<T: Scalar>(x: &[T], channels: usize, positions: usize, spec: &LrnSpec) -> Vec<f64> {
    let scale = spec.alpha / spec.neighborhood as f64;
    let mut d = vec![0f64; x.len()];
    for c in 0..channels {
        for n in spec.span(c, channels) {
            for p in 0..positions {
                let v = x[n * positions + p].as_f64();
                d[c * positions + p] += v * v;
            }
        }
    }
    for v in &mut d {
        *v = spec.k + scale * *v;
    }
    d
}

pub fn lrn_forward<T: Scalar>(input: &Tensor<T>, spec: &LrnSpec) -> Result<Tensor<T>> {
    spec.validate()?;
    let (channels, positions) = layout(input.shape())?;
    let x = input.data();
    let d = denominators(x, channels, positions, spec);
    let out = x
        .iter()
        .zip(&d)
        .map(|(&v, &den)| T::from_f64(v.as_f64() / den.powf(spec.beta)))
        .collect();
    Tensor::new(input.shape().to_vec(), out)
}

pub fn lrn_backward<T: Scalar>(grad_out: &Tensor<T>, cached_input: &Tensor<T>, spec: &LrnSpec) -> Result<Tensor<T>> {
    spec.validate()?;
    if grad_out.shape() != cached_input.shape() {
        return Err(Error::Shape(format!(
            "LRN backward: grad {:?} vs input {:?}",
            grad_out.shape(),
            cached_input.shape()
        )));
    }
    let (channels, positions) = layout(cached_input.shape())?;
    let x = cached_input.data();
    let g = grad_out.data();
    let d = denominators(x, channels, positions, spec);
    // t[c] = g[c] * x[c] * d[c]^(-beta-1); the neighborhood relation is symmetric.
    let t: Vec<f64> = (0..x.len())
        .map(|i| g[i].as_f64() * x[i].as_f64() * d[i].powf(-spec.beta - 1.0))
        .collect();
    let coef = 2.0 * spec.alpha * spec.beta / spec.neighborhood as f64;
    let mut gx = vec![0f64; x.len()];
    for c in 0..channels {
        for p in 0..positions {
            let i = c * positions + p;
            let mut cross = 0f64;
            for n in spec.span(c, channels) {
                cross += t[n * positions + p];
            }
            gx[i] = g[i].as_f64() * d[i].powf(-spec.beta) - coef * x[i].as_f64() * cross;
        }
    }
    Tensor::new(cached_input.shape().to_vec(), gx.into_iter().map(T::from_f64).collect())
}
