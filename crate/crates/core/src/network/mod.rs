//! Layer stacks built from [`crate::ops`], trained by momentum SGD on MSE.
//!
//! A model is a flat list of [`LayerSpec`]s. Shapes are propagated once at
//! build time, so every later shape error points at a layer index. Samples are
//! processed one at a time through the layer list; batches are handled by
//! iterating over their leading axis.

mod io;
mod train;

pub use io::{read_model, write_model};
pub use train::{fit, train_step, TrainConfig, TrainingLog};

use rand::{Rng, RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::ops::{self, ConvSpec, LrnSpec, Mode, PoolSpec};
use crate::{Error, FeatureMatrix, Result, Scalar, Tensor};

#[derive(Debug, Clone, PartialEq)]
pub enum LayerSpec {
    Conv(ConvSpec),
    Relu,
    MaxPool(PoolSpec),
    Lrn(LrnSpec),
    /// Fully connected layer producing `width` outputs from the flattened input.
    Affine {
        width: usize,
    },
    Dropout {
        rate: f64,
    },
}

impl LayerSpec {
    pub fn name(&self) -> &'static str {
        match self {
            LayerSpec::Conv(_) => "conv",
            LayerSpec::Relu => "relu",
            LayerSpec::MaxPool(_) => "maxpool",
            LayerSpec::Lrn(_) => "lrn",
            LayerSpec::Affine { .. } => "affine",
            LayerSpec::Dropout { .. } => "dropout",
        }
    }

    pub fn is_parametric(&self) -> bool {
        matches!(self, LayerSpec::Conv(_) | LayerSpec::Affine { .. })
    }

    fn output_shape(&self, input: &[usize]) -> Result<Vec<usize>> {
        match self {
            LayerSpec::Conv(spec) => spec.output_shape(input),
            LayerSpec::MaxPool(spec) => spec.output_shape(input),
            LayerSpec::Lrn(spec) => {
                spec.validate()?;
                if input.len() < 2 {
                    return Err(Error::Shape(format!("LRN needs a channel axis, got {input:?}")));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Relu => Ok(input.to_vec()),
            LayerSpec::Dropout { rate } => {
                if !(0.0..1.0).contains(rate) {
                    return Err(Error::InvalidArgument(format!("dropout rate {rate} outside [0, 1)")));
                }
                Ok(input.to_vec())
            }
            LayerSpec::Affine { width } => {
                if *width == 0 {
                    return Err(Error::InvalidArgument("affine width must be positive".into()));
                }
                Ok(vec![*width])
            }
        }
    }

    /// Weight and bias shapes for a parametric layer fed by `input`.
    fn param_shapes(&self, input: &[usize]) -> Option<(Vec<usize>, usize, usize)> {
        match self {
            LayerSpec::Conv(spec) => Some((spec.weight_shape(), spec.out_channels, spec.fan_in())),
            LayerSpec::Affine { width } => {
                let fan_in = input.iter().product();
                Some((vec![*width, fan_in], *width, fan_in))
            }
            _ => None,
        }
    }
}

/// Weights and bias of one parametric layer (also used for gradients and
/// momentum velocity, which share the same shapes).
#[derive(Debug, Clone, PartialEq)]
pub struct Params<T = f32> {
    pub weights: Tensor<T>,
    pub bias: Tensor<T>,
}

impl<T: Scalar> Params<T> {
    fn zeros_like(&self) -> Self {
        Self {
            weights: Tensor::zeros(self.weights.shape()),
            bias: Tensor::zeros(self.bias.shape()),
        }
    }
}

/// Per-layer parameter gradients, `None` for layers without parameters.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients<T = f32>(pub Vec<Option<Params<T>>>);

impl<T: Scalar> Gradients<T> {
    fn add_assign(&mut self, other: &Gradients<T>) -> Result<()> {
        for (a, b) in self.0.iter_mut().zip(&other.0) {
            if let (Some(a), Some(b)) = (a.as_mut(), b.as_ref()) {
                a.weights.add_assign(&b.weights)?;
                a.bias.add_assign(&b.bias)?;
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Init {
    Zeros,
    /// Zero-mean Gaussian weights with standard deviation `sqrt(2 / fan_in)`;
    /// biases start at zero.
    He {
        seed: u64,
    },
}

#[derive(Debug, Clone, PartialEq)]
pub struct NetworkModel<T: Scalar = f32> {
    input_shape: Vec<usize>,
    layers: Vec<LayerSpec>,
    /// `shapes[i]` is the input shape of layer `i`; the last entry is the output shape.
    shapes: Vec<Vec<usize>>,
    params: Vec<Option<Params<T>>>,
    velocity: Vec<Option<Params<T>>>,
    feature_layer_index: usize,
}

#[derive(Debug, Clone)]
enum Aux<T> {
    None,
    Argmax(Vec<usize>),
    Mask(Vec<T>),
}

/// Activations recorded by a forward pass over one sample.
#[derive(Debug, Clone)]
pub struct SampleCache<T> {
    inputs: Vec<Tensor<T>>,
    aux: Vec<Aux<T>>,
}

#[derive(Debug, Clone)]
pub struct BatchCache<T> {
    samples: Vec<SampleCache<T>>,
}

impl<T> BatchCache<T> {
    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }
}

impl<T: Scalar> NetworkModel<T> {
    /// Propagates `input_shape` through `layers`, returning the input shape
    /// of every layer followed by the output shape. Allocates no parameters.
    pub fn shape_plan(input_shape: &[usize], layers: &[LayerSpec]) -> Result<Vec<Vec<usize>>> {
        if input_shape.is_empty() || input_shape.contains(&0) {
            return Err(Error::Shape(format!("invalid model input shape {input_shape:?}")));
        }
        let mut shapes = vec![input_shape.to_vec()];
        for (i, layer) in layers.iter().enumerate() {
            let next = layer
                .output_shape(shapes.last().unwrap())
                .map_err(|e| Error::Shape(format!("layer {i} ({}): {e}", layer.name())))?;
            shapes.push(next);
        }
        Ok(shapes)
    }

    pub fn new(input_shape: &[usize], layers: Vec<LayerSpec>, feature_layer_index: usize, init: Init) -> Result<Self> {
        let shapes = Self::shape_plan(input_shape, &layers)?;
        match layers.get(feature_layer_index) {
            Some(LayerSpec::Affine { .. }) => {}
            _ => {
                return Err(Error::InvalidArgument(format!(
                    "feature layer index {feature_layer_index} does not address an affine layer"
                )))
            }
        }
        let mut rng = match init {
            Init::He { seed } => Some(ChaCha8Rng::seed_from_u64(seed)),
            Init::Zeros => None,
        };
        let mut params = Vec::with_capacity(layers.len());
        for (layer, shape) in layers.iter().zip(&shapes) {
            let p = layer.param_shapes(shape).map(|(wshape, bias_len, fan_in)| {
                let weights = match rng.as_mut() {
                    Some(rng) => {
                        let normal = Normal::new(0.0, (2.0 / fan_in as f64).sqrt()).unwrap();
                        Tensor::from_fn(&wshape, |_| T::from_f64(normal.sample(rng)))
                    }
                    None => Tensor::zeros(&wshape),
                };
                Params {
                    weights,
                    bias: Tensor::zeros(&[bias_len]),
                }
            });
            params.push(p);
        }
        let velocity = params.iter().map(|p| p.as_ref().map(Params::zeros_like)).collect();
        Ok(Self {
            input_shape: input_shape.to_vec(),
            layers,
            shapes,
            params,
            velocity,
            feature_layer_index,
        })
    }

    pub fn input_shape(&self) -> &[usize] {
        &self.input_shape
    }

    pub fn output_shape(&self) -> &[usize] {
        self.shapes.last().unwrap()
    }

    pub fn layers(&self) -> &[LayerSpec] {
        &self.layers
    }

    /// Input shape of each layer, followed by the model output shape.
    pub fn shapes(&self) -> &[Vec<usize>] {
        &self.shapes
    }

    pub fn feature_layer_index(&self) -> usize {
        self.feature_layer_index
    }

    pub fn feature_width(&self) -> usize {
        self.shapes[self.feature_layer_index + 1][0]
    }

    pub fn params(&self) -> &[Option<Params<T>>] {
        &self.params
    }

    pub fn velocity(&self) -> &[Option<Params<T>>] {
        &self.velocity
    }

    pub fn parameter_count(&self) -> usize {
        self.params
            .iter()
            .flatten()
            .map(|p| p.weights.len() + p.bias.len())
            .sum()
    }

    /// Replaces the parameters of layer `index`; shapes must match.
    pub fn set_params(&mut self, index: usize, params: Params<T>) -> Result<()> {
        let current = self
            .params
            .get_mut(index)
            .and_then(Option::as_mut)
            .ok_or_else(|| Error::InvalidArgument(format!("layer {index} has no parameters")))?;
        if current.weights.shape() != params.weights.shape() || current.bias.shape() != params.bias.shape() {
            return Err(Error::Shape(format!(
                "layer {index}: parameter shapes {:?}/{:?} do not match {:?}/{:?}",
                params.weights.shape(),
                params.bias.shape(),
                current.weights.shape(),
                current.bias.shape()
            )));
        }
        *current = params;
        Ok(())
    }

    pub fn cast<U: Scalar>(&self) -> NetworkModel<U> {
        let conv = |ps: &Vec<Option<Params<T>>>| {
            ps.iter()
                .map(|p| {
                    p.as_ref().map(|p| Params {
                        weights: p.weights.cast(),
                        bias: p.bias.cast(),
                    })
                })
                .collect()
        };
        NetworkModel {
            input_shape: self.input_shape.clone(),
            layers: self.layers.clone(),
            shapes: self.shapes.clone(),
            params: conv(&self.params),
            velocity: conv(&self.velocity),
            feature_layer_index: self.feature_layer_index,
        }
    }

    fn layer_err(&self, i: usize, e: Error) -> Error {
        Error::Shape(format!("layer {i} ({}): {e}", self.layers[i].name()))
    }

    /// Runs one sample through layers `0..=last`. `dropout_rate` overrides
    /// the rate stored in dropout layers.
    fn forward_sample<R: Rng + ?Sized>(
        &self,
        x: &Tensor<T>,
        last: usize,
        mode: Mode,
        dropout_rate: Option<f64>,
        rng: &mut R,
        keep_cache: bool,
    ) -> Result<(Tensor<T>, Option<SampleCache<T>>)> {
        if x.shape() != self.input_shape.as_slice() {
            return Err(Error::Shape(format!(
                "layer 0 ({}): sample shape {:?}, model expects {:?}",
                self.layers.first().map_or("input", LayerSpec::name),
                x.shape(),
                self.input_shape
            )));
        }
        let mut cache = keep_cache.then(|| SampleCache {
            inputs: Vec::with_capacity(last + 1),
            aux: Vec::with_capacity(last + 1),
        });
        let mut cur = x.clone();
        for i in 0..=last {
            let (next, aux) = match &self.layers[i] {
                LayerSpec::Conv(spec) => {
                    let p = self.params[i].as_ref().unwrap();
                    (ops::conv_forward(&cur, &p.weights, p.bias.data(), spec), Aux::None)
                }
                LayerSpec::Relu => (Ok(ops::relu(&cur)), Aux::None),
                LayerSpec::MaxPool(spec) => match ops::maxpool_forward(&cur, spec) {
                    Ok((y, idx)) => (Ok(y), Aux::Argmax(idx)),
                    Err(e) => (Err(e), Aux::None),
                },
                LayerSpec::Lrn(spec) => (ops::lrn_forward(&cur, spec), Aux::None),
                LayerSpec::Affine { .. } => {
                    let p = self.params[i].as_ref().unwrap();
                    (ops::affine_forward(&cur, &p.weights, p.bias.data()), Aux::None)
                }
                LayerSpec::Dropout { rate } => {
                    let rate = dropout_rate.unwrap_or(*rate);
                    match ops::dropout(&cur, rate, mode, rng) {
                        Ok((y, mask)) => (Ok(y), Aux::Mask(mask)),
                        Err(e) => (Err(e), Aux::None),
                    }
                }
            };
            let next = next.map_err(|e| self.layer_err(i, e))?;
            if let Some(c) = cache.as_mut() {
                c.inputs.push(std::mem::replace(&mut cur, next));
                c.aux.push(aux);
            } else {
                cur = next;
            }
        }
        Ok((cur, cache))
    }

    /// Backpropagates `grad_out` (gradient of the loss with respect to the
    /// model output) through one cached sample.
    fn backward_sample(&self, cache: &SampleCache<T>, grad_out: Tensor<T>) -> Result<(Gradients<T>, Tensor<T>)> {
        let mut grads: Vec<Option<Params<T>>> = vec![None; self.layers.len()];
        let mut g = grad_out;
        for i in (0..cache.inputs.len()).rev() {
            let x = &cache.inputs[i];
            g = match (&self.layers[i], &cache.aux[i]) {
                (LayerSpec::Conv(spec), _) => {
                    let p = self.params[i].as_ref().unwrap();
                    let cg = ops::conv_backward(&g, x, &p.weights, spec).map_err(|e| self.layer_err(i, e))?;
                    grads[i] = Some(Params {
                        weights: cg.weights,
                        bias: Tensor::new(vec![cg.bias.len()], cg.bias)?,
                    });
                    cg.input
                }
                (LayerSpec::Affine { .. }, _) => {
                    let p = self.params[i].as_ref().unwrap();
                    let ag = ops::affine_backward(&g, x, &p.weights).map_err(|e| self.layer_err(i, e))?;
                    grads[i] = Some(Params {
                        weights: ag.weights,
                        bias: Tensor::new(vec![ag.bias.len()], ag.bias)?,
                    });
                    ag.input
                }
                (LayerSpec::Relu, _) => ops::relu_backward(x, &g).map_err(|e| self.layer_err(i, e))?,
                (LayerSpec::MaxPool(_), Aux::Argmax(idx)) => {
                    ops::maxpool_backward(&g, idx, x.shape()).map_err(|e| self.layer_err(i, e))?
                }
                (LayerSpec::Lrn(spec), _) => ops::lrn_backward(&g, x, spec).map_err(|e| self.layer_err(i, e))?,
                (LayerSpec::Dropout { .. }, Aux::Mask(mask)) => {
                    ops::dropout_backward(&g, mask).map_err(|e| self.layer_err(i, e))?
                }
                _ => {
                    return Err(Error::InvalidArgument(format!(
                        "layer {i}: cache does not match layer kind"
                    )))
                }
            };
        }
        // Layers after the cached prefix contribute zero gradient.
        let full = grads
            .into_iter()
            .zip(&self.params)
            .map(|(g, p)| g.or_else(|| p.as_ref().map(Params::zeros_like)))
            .collect();
        Ok((Gradients(full), g))
    }

    fn zero_gradients(&self) -> Gradients<T> {
        Gradients(self.params.iter().map(|p| p.as_ref().map(Params::zeros_like)).collect())
    }

    fn split_batch(&self, batch: &Tensor<T>) -> Result<Vec<Tensor<T>>> {
        if batch.rank() != self.input_shape.len() + 1 || batch.shape()[1..] != self.input_shape[..] {
            return Err(Error::Shape(format!(
                "layer 0 ({}): batch shape {:?}, expected [N, {}]",
                self.layers.first().map_or("input", LayerSpec::name),
                batch.shape(),
                self.input_shape
                    .iter()
                    .map(ToString::to_string)
                    .collect::<Vec<_>>()
                    .join(", ")
            )));
        }
        batch
            .unstack()
            .or_else(|_| Ok(vec![batch.clone().reshape(&self.input_shape)?]))
    }

    fn scalar_output(&self, y: &Tensor<T>) -> Result<f64> {
        if y.len() != 1 {
            return Err(Error::Shape(format!(
                "model output has {} values per sample; a scalar head is required",
                y.len()
            )));
        }
        Ok(y.data()[0].as_f64())
    }

    /// Forward pass over a batch `[N, input...]`, returning one prediction per
    /// sample and the activations needed by [`NetworkModel::backward`].
    pub fn forward<R: Rng + ?Sized>(
        &self,
        batch: &Tensor<T>,
        mode: Mode,
        rng: &mut R,
    ) -> Result<(Vec<f64>, BatchCache<T>)> {
        self.forward_with_rate(batch, mode, None, rng)
    }

    fn forward_with_rate<R: Rng + ?Sized>(
        &self,
        batch: &Tensor<T>,
        mode: Mode,
        dropout_rate: Option<f64>,
        rng: &mut R,
    ) -> Result<(Vec<f64>, BatchCache<T>)> {
        let samples = self.split_batch(batch)?;
        let seeds: Vec<u64> = samples.iter().map(|_| rng.next_u64()).collect();
        let last = self.layers.len() - 1;
        let results: Vec<Result<(f64, SampleCache<T>)>> = samples
            .par_iter()
            .zip(seeds.par_iter())
            .map(|(x, &seed)| {
                let mut srng = ChaCha8Rng::seed_from_u64(seed);
                let (y, cache) = self.forward_sample(x, last, mode, dropout_rate, &mut srng, true)?;
                Ok((self.scalar_output(&y)?, cache.unwrap()))
            })
            .collect();
        let mut preds = Vec::with_capacity(samples.len());
        let mut caches = Vec::with_capacity(samples.len());
        for r in results {
            let (p, c) = r?;
            preds.push(p);
            caches.push(c);
        }
        Ok((preds, BatchCache { samples: caches }))
    }

    /// Parameter gradients of `sum_n grad_pred[n] * pred[n]`, summed over the
    /// batch in sample order.
    pub fn backward(&self, cache: &BatchCache<T>, grad_pred: &[f64]) -> Result<Gradients<T>> {
        if grad_pred.len() != cache.samples.len() {
            return Err(Error::Shape(format!(
                "backward: {} upstream gradients for a batch of {}",
                grad_pred.len(),
                cache.samples.len()
            )));
        }
        let out_shape = self.output_shape().to_vec();
        let mut total = self.zero_gradients();
        for (c, &g) in cache.samples.iter().zip(grad_pred) {
            let (grads, _) = self.backward_sample(c, Tensor::filled(&out_shape, T::from_f64(g)))?;
            total.add_assign(&grads)?;
        }
        Ok(total)
    }

    /// Inference-mode predictions for a batch.
    pub fn predict(&self, batch: &Tensor<T>) -> Result<Vec<f64>> {
        let samples = self.split_batch(batch)?;
        let last = self.layers.len() - 1;
        samples
            .par_iter()
            .map(|x| {
                let (y, _) = self.forward_sample(x, last, Mode::Infer, None, &mut NoRng, false)?;
                self.scalar_output(&y)
            })
            .collect()
    }

    /// Output of the feature layer for every sample of a batch, in inference mode.
    pub fn extract_features(&self, batch: &Tensor<T>) -> Result<FeatureMatrix> {
        let samples = self.split_batch(batch)?;
        self.extract_features_from(&samples)
    }

    pub fn extract_features_from(&self, samples: &[Tensor<T>]) -> Result<FeatureMatrix> {
        let rows: Vec<Result<Vec<f64>>> = samples
            .par_iter()
            .map(|x| {
                let (y, _) = self.forward_sample(x, self.feature_layer_index, Mode::Infer, None, &mut NoRng, false)?;
                Ok(y.data().iter().map(|v| v.as_f64()).collect())
            })
            .collect();
        let width = self.feature_width();
        let mut data = Vec::with_capacity(samples.len() * width);
        for r in rows {
            data.extend(r?);
        }
        FeatureMatrix::new(samples.len(), width, data)
    }

    fn params_and_velocity_mut(&mut self) -> impl Iterator<Item = (&mut Params<T>, &mut Params<T>)> {
        self.params
            .iter_mut()
            .zip(self.velocity.iter_mut())
            .filter_map(|(p, v)| Some((p.as_mut()?, v.as_mut()?)))
    }
}

/// Inference never draws random numbers; this generator is never consulted.
struct NoRng;

impl RngCore for NoRng {
    fn next_u32(&mut self) -> u32 {
        unreachable!("inference does not sample")
    }
    fn next_u64(&mut self) -> u64 {
        unreachable!("inference does not sample")
    }
    fn fill_bytes(&mut self, _dest: &mut [u8]) {
        unreachable!("inference does not sample")
    }
    fn try_fill_bytes(&mut self, _dest: &mut [u8]) -> std::result::Result<(), rand::Error> {
        unreachable!("inference does not sample")
    }
}
