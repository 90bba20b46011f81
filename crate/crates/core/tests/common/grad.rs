//! Central finite differences (h = 1e-3, f64 throughout) against the
//! analytic backward passes.

use instaffect::network::{Init, LayerSpec, NetworkModel, Params};
use instaffect::ops::{self, ConvSpec, LrnSpec, Mode, PoolSpec};
use instaffect::Tensor;
use rand::seq::SliceRandom;
use rand::Rng;

use super::{max_rel_err, rng, uniform_vec};

pub const H: f64 = 1e-3;
/// Gradient entries this small in both estimates count as agreeing.
const FLOOR: f64 = 1e-8;

pub fn central_diff(f: impl Fn(&[f64]) -> f64, x: &[f64]) -> Vec<f64> {
    let mut buf = x.to_vec();
    (0..x.len())
        .map(|i| {
            buf[i] = x[i] + H;
            let up = f(&buf);
            buf[i] = x[i] - H;
            let down = f(&buf);
            buf[i] = x[i];
            (up - down) / (2.0 * H)
        })
        .collect()
}

fn t(shape: &[usize], data: &[f64]) -> Tensor<f64> {
    Tensor::new(shape.to_vec(), data.to_vec()).unwrap()
}

fn dot(a: &Tensor<f64>, u: &[f64]) -> f64 {
    a.data().iter().zip(u).map(|(x, y)| x * y).sum()
}

pub fn conv_case(in_shape: &[usize], spec: ConvSpec, seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = uniform_vec(&mut r, in_shape.iter().product(), -1.0, 1.0);
    let wshape = spec.weight_shape();
    let w = uniform_vec(&mut r, wshape.iter().product(), -1.0, 1.0);
    let b = uniform_vec(&mut r, spec.out_channels, -0.5, 0.5);
    let out_shape = spec.output_shape(in_shape).unwrap();
    let u = uniform_vec(&mut r, out_shape.iter().product(), -1.0, 1.0);

    let objective = |x: &[f64], w: &[f64], b: &[f64]| {
        dot(
            &ops::conv_forward(&t(in_shape, x), &t(&wshape, w), b, &spec).unwrap(),
            &u,
        )
    };
    let g = ops::conv_backward(&t(&out_shape, &u), &t(in_shape, &x), &t(&wshape, &w), &spec).unwrap();
    let nx = central_diff(|v| objective(v, &w, &b), &x);
    let nw = central_diff(|v| objective(&x, v, &b), &w);
    let nb = central_diff(|v| objective(&x, &w, v), &b);
    max_rel_err(g.input.data(), &nx, FLOOR)
        .max(max_rel_err(g.weights.data(), &nw, FLOOR))
        .max(max_rel_err(&g.bias, &nb, FLOOR))
}

fn pool_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    // distinct values spaced well beyond 2h so no perturbation changes a window max
    let mut x: Vec<f64> = (0..72).map(|i| i as f64 * 0.05).collect();
    x.shuffle(&mut r);
    let shape = [2, 6, 6];
    let spec = PoolSpec::new(&[2, 2], &[2, 2]);
    let (y, argmax) = ops::maxpool_forward(&t(&shape, &x), &spec).unwrap();
    let u = uniform_vec(&mut r, y.len(), -1.0, 1.0);
    let g = ops::maxpool_backward(&t(y.shape(), &u), &argmax, &shape).unwrap();
    let n = central_diff(|v| dot(&ops::maxpool_forward(&t(&shape, v), &spec).unwrap().0, &u), &x);
    max_rel_err(g.data(), &n, FLOOR)
}

fn lrn_case(spec: LrnSpec, seed: u64) -> f64 {
    let mut r = rng(seed);
    let shape = [7, 3, 3];
    let x = uniform_vec(&mut r, 63, -2.0, 2.0);
    let u = uniform_vec(&mut r, 63, -1.0, 1.0);
    let g = ops::lrn_backward(&t(&shape, &u), &t(&shape, &x), &spec).unwrap();
    let n = central_diff(|v| dot(&ops::lrn_forward(&t(&shape, v), &spec).unwrap(), &u), &x);
    max_rel_err(g.data(), &n, FLOOR)
}

fn affine_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = uniform_vec(&mut r, 8, -1.0, 1.0);
    let w = uniform_vec(&mut r, 32, -1.0, 1.0);
    let b = uniform_vec(&mut r, 4, -1.0, 1.0);
    let u = uniform_vec(&mut r, 4, -1.0, 1.0);
    let objective =
        |x: &[f64], w: &[f64], b: &[f64]| dot(&ops::affine_forward(&t(&[8], x), &t(&[4, 8], w), b).unwrap(), &u);
    let g = ops::affine_backward(&t(&[4], &u), &t(&[8], &x), &t(&[4, 8], &w)).unwrap();
    let nx = central_diff(|v| objective(v, &w, &b), &x);
    let nw = central_diff(|v| objective(&x, v, &b), &w);
    let nb = central_diff(|v| objective(&x, &w, v), &b);
    max_rel_err(g.input.data(), &nx, FLOOR)
        .max(max_rel_err(g.weights.data(), &nw, FLOOR))
        .max(max_rel_err(&g.bias, &nb, FLOOR))
}

fn relu_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    // keep inputs away from the kink
    let x: Vec<f64> = (0..40)
        .map(|_| {
            let m = r.gen_range(0.01..1.0);
            if r.gen_bool(0.5) {
                m
            } else {
                -m
            }
        })
        .collect();
    let u = uniform_vec(&mut r, 40, -1.0, 1.0);
    let g = ops::relu_backward(&t(&[4, 10], &x), &t(&[4, 10], &u)).unwrap();
    let n = central_diff(|v| dot(&ops::relu(&t(&[4, 10], v)), &u), &x);
    max_rel_err(g.data(), &n, FLOOR)
}

fn dropout_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    let x = uniform_vec(&mut r, 50, -1.0, 1.0);
    let u = uniform_vec(&mut r, 50, -1.0, 1.0);
    let forward = |v: &[f64]| ops::dropout(&t(&[50], v), 0.5, Mode::Train, &mut rng(seed ^ 0xd0)).unwrap();
    let (_, mask) = forward(&x);
    let g = ops::dropout_backward(&t(&[50], &u), &mask).unwrap();
    let n = central_diff(|v| dot(&forward(v).0, &u), &x);
    max_rel_err(g.data(), &n, FLOOR)
}

fn mse_case(seed: u64) -> f64 {
    let mut r = rng(seed);
    let p = uniform_vec(&mut r, 6, -1.0, 1.0);
    let target = uniform_vec(&mut r, 6, -1.0, 1.0);
    let (_, g) = ops::mse_loss(&p, &target).unwrap();
    let n = central_diff(|v| ops::mse_loss(v, &target).unwrap().0, &p);
    max_rel_err(&g, &n, FLOOR)
}

/// Maximum relative error per backward op.
pub fn per_op_errors() -> Vec<(&'static str, f64)> {
    let lrn_strong = LrnSpec {
        neighborhood: 3,
        k: 1.0,
        alpha: 0.5,
        beta: 0.75,
    };
    vec![
        (
            "conv2d 4x4 3x3",
            conv_case(&[2, 4, 4], ConvSpec::new_2d(2, 3, [3, 3]), 1),
        ),
        (
            "conv2d stride 2 pad 1",
            conv_case(
                &[2, 5, 5],
                ConvSpec::new_2d(2, 2, [3, 3])
                    .with_stride(&[2, 2])
                    .with_padding(&[1, 1]),
                2,
            ),
        ),
        ("conv1d stride 2", conv_case(&[2, 30], ConvSpec::new_1d(2, 3, 5, 2), 3)),
        ("maxpool 6x6 2x2/2", pool_case(4)),
        ("lrn default", lrn_case(LrnSpec::default(), 5)),
        ("lrn strong", lrn_case(lrn_strong, 6)),
        ("affine 8->4", affine_case(7)),
        ("relu", relu_case(8)),
        ("dropout", dropout_case(9)),
        ("mse", mse_case(10)),
    ]
}

pub fn mini_layers() -> Vec<LayerSpec> {
    vec![
        LayerSpec::Conv(ConvSpec::new_2d(1, 3, [3, 3])),
        LayerSpec::Relu,
        LayerSpec::MaxPool(PoolSpec::new(&[2, 2], &[2, 2])),
        LayerSpec::Lrn(LrnSpec::default()),
        LayerSpec::Affine { width: 6 },
        LayerSpec::Relu,
        LayerSpec::Dropout { rate: 0.5 },
        LayerSpec::Affine { width: 1 },
    ]
}

/// Maximum relative error of every parameter gradient of an 8x8 miniature
/// network trained on MSE, with a fixed dropout mask.
pub fn end_to_end_error() -> f64 {
    let mut r = rng(11);
    let model = NetworkModel::<f64>::new(&[1, 8, 8], mini_layers(), 4, Init::He { seed: 12 }).unwrap();
    let batch = Tensor::new(vec![3, 1, 8, 8], uniform_vec(&mut r, 192, 0.0, 1.0)).unwrap();
    let targets = uniform_vec(&mut r, 3, -1.0, 1.0);
    let loss = |m: &NetworkModel<f64>| {
        let (pred, _) = m.forward(&batch, Mode::Train, &mut rng(13)).unwrap();
        ops::mse_loss(&pred, &targets).unwrap().0
    };
    let (pred, cache) = model.forward(&batch, Mode::Train, &mut rng(13)).unwrap();
    let (_, gp) = ops::mse_loss(&pred, &targets).unwrap();
    let grads = model.backward(&cache, &gp).unwrap();

    let mut worst = 0.0f64;
    for (layer, p) in model.params().iter().enumerate() {
        let Some(p) = p else { continue };
        let g = grads.0[layer].as_ref().unwrap();
        let w = p.weights.data().to_vec();
        let b = p.bias.data().to_vec();
        let with = |w: &[f64], b: &[f64]| {
            let mut m = model.clone();
            m.set_params(
                layer,
                Params {
                    weights: t(p.weights.shape(), w),
                    bias: t(p.bias.shape(), b),
                },
            )
            .unwrap();
            loss(&m)
        };
        let nw = central_diff(|v| with(v, &b), &w);
        let nb = central_diff(|v| with(&w, v), &b);
        worst = worst
            .max(max_rel_err(g.weights.data(), &nw, FLOOR))
            .max(max_rel_err(g.bias.data(), &nb, FLOOR));
    }
    worst
}
