use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{Gradients, NetworkModel};
use crate::ops::{self, Mode};
use crate::{Error, Result, Scalar, Tensor};

/// Samples per gradient chunk are summed sequentially, then chunks are summed
/// in order, so results do not depend on the thread count.
const GRAD_CHUNKS: usize = 8;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub batch_size: usize,
    pub epochs: usize,
    pub dropout_rate: f64,
    pub seed: u64,
    /// Multiplier applied to the learning rate after every epoch.
    pub lr_decay: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            momentum: 0.9,
            batch_size: 32,
            epochs: 10,
            dropout_rate: 0.5,
            seed: 0,
            lr_decay: 0.95,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: &str| Err(Error::InvalidArgument(format!("train config: {m}")));
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return bad("learning_rate must be a finite non-negative number");
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return bad("momentum must lie in [0, 1)");
        }
        if self.batch_size == 0 {
            return bad("batch_size must be positive");
        }
        if !(0.0..1.0).contains(&self.dropout_rate) {
            return bad("dropout_rate must lie in [0, 1)");
        }
        if !(self.lr_decay > 0.0 && self.lr_decay <= 1.0) {
            return bad("lr_decay must lie in (0, 1]");
        }
        Ok(())
    }
}

/// One momentum SGD step on the batch MSE. Returns the loss before the update.
pub fn train_step<T: Scalar, R: Rng + ?Sized>(
    model: &mut NetworkModel<T>,
    batch: &Tensor<T>,
    targets: &[f64],
    cfg: &TrainConfig,
    rng: &mut R,
) -> Result<f64> {
    cfg.validate()?;
    let samples = model.split_batch(batch)?;
    if targets.len() != samples.len() {
        return Err(Error::Shape(format!(
            "train_step: {} targets for a batch of {}",
            targets.len(),
            samples.len()
        )));
    }
    let n = samples.len();
    let seeds: Vec<u64> = (0..n).map(|_| rng.next_u64()).collect();
    let chunk = n.div_ceil(GRAD_CHUNKS).max(1);
    let last = model.layers.len() - 1;
    let out_shape = model.output_shape().to_vec();
    let frozen: &NetworkModel<T> = model;

    let partials: Vec<Result<(Gradients<T>, Vec<f64>)>> = (0..n)
        .step_by(chunk)
        .collect::<Vec<_>>()
        .into_par_iter()
        .map(|start| {
            let mut acc = frozen.zero_gradients();
            let mut preds = Vec::with_capacity(chunk);
            for i in start..(start + chunk).min(n) {
                let mut srng = ChaCha8Rng::seed_from_u64(seeds[i]);
                let (y, cache) =
                    frozen.forward_sample(&samples[i], last, Mode::Train, Some(cfg.dropout_rate), &mut srng, true)?;
                let pred = frozen.scalar_output(&y)?;
                let g = 2.0 * (pred - targets[i]) / n as f64;
                let (grads, _) = frozen.backward_sample(&cache.unwrap(), Tensor::filled(&out_shape, T::from_f64(g)))?;
                acc.add_assign(&grads)?;
                preds.push(pred);
            }
            Ok((acc, preds))
        })
        .collect();

    let mut total = model.zero_gradients();
    let mut preds = Vec::with_capacity(n);
    for p in partials {
        let (g, ps) = p?;
        total.add_assign(&g)?;
        preds.extend(ps);
    }
    let (loss, _) = ops::mse_loss(&preds, targets)?;
    if !loss.is_finite() {
        return Err(Error::Numeric(format!("training loss became non-finite ({loss})")));
    }

    let lr = T::from_f64(cfg.learning_rate);
    let mu = T::from_f64(cfg.momentum);
    for ((p, v), g) in model.params_and_velocity_mut().zip(total.0.iter().flatten()) {
        for ((w, vel), &gw) in p
            .weights
            .data_mut()
            .iter_mut()
            .zip(v.weights.data_mut())
            .zip(g.weights.data())
        {
            *vel = mu * *vel - lr * gw;
            *w = *w + *vel;
        }
        for ((b, vel), &gb) in p.bias.data_mut().iter_mut().zip(v.bias.data_mut()).zip(g.bias.data()) {
            *vel = mu * *vel - lr * gb;
            *b = *b + *vel;
        }
    }
    Ok(loss)
}

/// Mean training loss per epoch.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct TrainingLog {
    pub epoch_losses: Vec<f64>,
}

impl TrainingLog {
    pub fn to_csv(&self) -> String {
        let mut s = String::from("epoch,loss\n");
        for (i, l) in self.epoch_losses.iter().enumerate() {
            s.push_str(&format!("{},{l:e}\n", i + 1));
        }
        s
    }
}

/// Epoch loop around [`train_step`]. Sample order is reshuffled every epoch
/// from `cfg.seed`; the learning rate decays by `cfg.lr_decay` per epoch.
pub fn fit<T: Scalar>(
    model: &mut NetworkModel<T>,
    inputs: &[Tensor<T>],
    targets: &[f64],
    cfg: &TrainConfig,
) -> Result<TrainingLog> {
    cfg.validate()?;
    if inputs.is_empty() {
        return Err(Error::InvalidArgument("fit needs a nonempty dataset".into()));
    }
    if inputs.len() != targets.len() {
        return Err(Error::Shape(format!(
            "fit: {} inputs vs {} targets",
            inputs.len(),
            targets.len()
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
    let mut order: Vec<usize> = (0..inputs.len()).collect();
    let mut log = TrainingLog::default();
    let mut step_cfg = cfg.clone();
    for epoch in 0..cfg.epochs {
        step_cfg.learning_rate = cfg.learning_rate * cfg.lr_decay.powi(epoch as i32);
        order.shuffle(&mut rng);
        let mut weighted = 0.0;
        for idx in order.chunks(cfg.batch_size) {
            let items: Vec<&Tensor<T>> = idx.iter().map(|&i| &inputs[i]).collect();
            let batch = Tensor::stack(&items)?;
            let t: Vec<f64> = idx.iter().map(|&i| targets[i]).collect();
            let loss = train_step(model, &batch, &t, &step_cfg, &mut rng)?;
            weighted += loss * idx.len() as f64;
        }
        let mean = weighted / inputs.len() as f64;
        log::debug!("epoch {}: mean loss {mean:.6}", epoch + 1);
        log.epoch_losses.push(mean);
    }
    Ok(log)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::network::{Init, LayerSpec, Params};

    fn linear_model(w: f64) -> NetworkModel<f64> {
        let mut m = NetworkModel::new(&[1], vec![LayerSpec::Affine { width: 1 }], 0, Init::Zeros).unwrap();
        m.set_params(
            0,
            Params {
                weights: Tensor::new(vec![1, 1], vec![w]).unwrap(),
                bias: Tensor::zeros(&[1]),
            },
        )
        .unwrap();
        m
    }

    fn no_dropout(lr: f64, momentum: f64) -> TrainConfig {
        TrainConfig {
            learning_rate: lr,
            momentum,
            dropout_rate: 0.0,
            ..TrainConfig::default()
        }
    }

    #[test]
    fn zero_momentum_is_plain_sgd() {
        let mut m = linear_model(0.5);
        let batch = Tensor::new(vec![2, 1], vec![1.0, 2.0]).unwrap();
        let targets = [1.0, 3.0];
        // dL/dw = 2/N * sum (w x - t) x, dL/db = 2/N * sum (w x - t)
        let gw = (0.5f64 * 1.0 - 1.0) * 1.0 + (0.5 * 2.0 - 3.0) * 2.0;
        let gb = (0.5f64 * 1.0 - 1.0) + (0.5 * 2.0 - 3.0);
        let cfg = no_dropout(0.1, 0.0);
        train_step(&mut m, &batch, &targets, &cfg, &mut ChaCha8Rng::seed_from_u64(0)).unwrap();
        let p = m.params()[0].as_ref().unwrap();
        assert!((p.weights.data()[0] - (0.5 - 0.1 * gw)).abs() < 1e-15);
        assert!((p.bias.data()[0] - (0.0 - 0.1 * gb)).abs() < 1e-15);
    }

    #[test]
    fn perfect_fit_is_a_fixed_point() {
        let mut m = linear_model(2.0);
        let before = m.clone();
        let batch = Tensor::new(vec![3, 1], vec![1.0, -1.0, 0.5]).unwrap();
        let loss = train_step(
            &mut m,
            &batch,
            &[2.0, -2.0, 1.0],
            &no_dropout(0.1, 0.9),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap();
        assert_eq!(loss, 0.0);
        assert_eq!(m.params(), before.params());
    }

    #[test]
    fn converges_to_least_squares_slope() {
        // Samples (1, 2) and its mirror (-1, -2): the least-squares fit of
        // y = w x is w = 2, and the mirrored pair keeps the bias gradient at zero.
        let mut m = NetworkModel::<f64>::new(&[1], vec![LayerSpec::Affine { width: 1 }], 0, Init::Zeros).unwrap();
        let batch = Tensor::new(vec![2, 1], vec![1.0, -1.0]).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0);
        let cfg = no_dropout(0.1, 0.0);
        let mut steps = 0;
        while steps < 500 {
            train_step(&mut m, &batch, &[2.0, -2.0], &cfg, &mut rng).unwrap();
            steps += 1;
            let p = m.params()[0].as_ref().unwrap();
            assert_eq!(p.bias.data()[0], 0.0);
            if (p.weights.data()[0] - 2.0).abs() < 1e-3 {
                break;
            }
        }
        let w = m.params()[0].as_ref().unwrap().weights.data()[0];
        assert!((w - 2.0).abs() < 1e-3, "w = {w} after {steps} steps");
    }

    #[test]
    fn zero_epochs_is_noop() {
        let mut m = linear_model(1.5);
        let before = m.clone();
        let cfg = TrainConfig {
            epochs: 0,
            ..no_dropout(0.1, 0.9)
        };
        let log = fit(&mut m, &[Tensor::from_vec(vec![1.0])], &[0.0], &cfg).unwrap();
        assert!(log.epoch_losses.is_empty());
        assert_eq!(m, before);
    }

    #[test]
    fn non_finite_loss_aborts() {
        let mut m = linear_model(1.0);
        let batch = Tensor::new(vec![1, 1], vec![f64::INFINITY]).unwrap();
        let err = train_step(
            &mut m,
            &batch,
            &[0.0],
            &no_dropout(0.1, 0.0),
            &mut ChaCha8Rng::seed_from_u64(0),
        )
        .unwrap_err();
        assert_eq!(err.category(), "numeric");
    }
}
