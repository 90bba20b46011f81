//! Versioned binary model file.
//!
//! ```text
//! magic  "IANM"
//! u32    version (1)
//! u32    input rank, then u32 per input extent
//! u32    layer count
//! u32    feature layer index
//! per layer: u32 tag, then
//!   0 conv    u32 rank, u32[rank] kernel, u32[rank] stride, u32[rank] padding, u32 in, u32 out
//!   1 relu    -
//!   2 maxpool u32 rank, u32[rank] window, u32[rank] stride
//!   3 lrn     u32 neighborhood, f64 k, f64 alpha, f64 beta
//!   4 affine  u32 width
//!   5 dropout f64 rate
//! per parametric layer, in layer order:
//!   u64 weight count, f32[count] weights, u64 bias count, f32[count] bias
//! ```
//! All integers and floats are little-endian. Momentum state is not stored.

use std::fs;
use std::path::Path;

use super::{Init, LayerSpec, NetworkModel, Params};
use crate::ops::{ConvSpec, LrnSpec, PoolSpec};
use crate::{Error, Result, Tensor};

const MAGIC: &[u8; 4] = b"IANM";
const VERSION: u32 = 1;

struct Writer(Vec<u8>);

impl Writer {
    fn u32(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u32).to_le_bytes());
    }
    fn u64(&mut self, v: usize) {
        self.0.extend_from_slice(&(v as u64).to_le_bytes());
    }
    fn f64(&mut self, v: f64) {
        self.0.extend_from_slice(&v.to_le_bytes());
    }
    fn dims(&mut self, v: &[usize]) {
        for &d in v {
            self.u32(d);
        }
    }
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl Reader<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        if self.pos + n > self.bytes.len() {
            return Err(Error::format(
                self.path,
                format!("truncated model file at byte {}", self.pos),
            ));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }
    fn u32(&mut self) -> Result<usize> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()) as usize)
    }
    fn u64(&mut self) -> Result<usize> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()) as usize)
    }
    fn f64(&mut self) -> Result<f64> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
    fn dims(&mut self, n: usize) -> Result<Vec<usize>> {
        (0..n).map(|_| self.u32()).collect()
    }
    fn f32s(&mut self, n: usize) -> Result<Vec<f32>> {
        let raw = self.take(
            n.checked_mul(4)
                .ok_or_else(|| Error::format(self.path, "blob too large"))?,
        )?;
        Ok(raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect())
    }
}

pub fn write_model(path: &Path, model: &NetworkModel<f32>) -> Result<()> {
    let mut w = Writer(Vec::new());
    w.0.extend_from_slice(MAGIC);
    w.u32(VERSION as usize);
    w.u32(model.input_shape.len());
    w.dims(&model.input_shape);
    w.u32(model.layers.len());
    w.u32(model.feature_layer_index);
    for layer in &model.layers {
        match layer {
            LayerSpec::Conv(s) => {
                w.u32(0);
                w.u32(s.kernel.len());
                w.dims(&s.kernel);
                w.dims(&s.stride);
                w.dims(&s.padding);
                w.u32(s.in_channels);
                w.u32(s.out_channels);
            }
            LayerSpec::Relu => w.u32(1),
            LayerSpec::MaxPool(s) => {
                w.u32(2);
                w.u32(s.window.len());
                w.dims(&s.window);
                w.dims(&s.stride);
            }
            LayerSpec::Lrn(s) => {
                w.u32(3);
                w.u32(s.neighborhood);
                w.f64(s.k);
                w.f64(s.alpha);
                w.f64(s.beta);
            }
            LayerSpec::Affine { width } => {
                w.u32(4);
                w.u32(*width);
            }
            LayerSpec::Dropout { rate } => {
                w.u32(5);
                w.f64(*rate);
            }
        }
    }
    for p in model.params.iter().flatten() {
        for t in [&p.weights, &p.bias] {
            w.u64(t.len());
            for v in t.data() {
                w.0.extend_from_slice(&v.to_le_bytes());
            }
        }
    }
    fs::write(path, w.0).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<NetworkModel<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut r = Reader {
        bytes: &bytes,
        pos: 0,
        path,
    };
    if r.take(4)? != MAGIC {
        return Err(Error::format(path, "not a model file (bad magic)"));
    }
    let version = r.u32()?;
    if version != VERSION as usize {
        return Err(Error::format(path, format!("unsupported model version {version}")));
    }
    let rank = r.u32()?;
    let input_shape = r.dims(rank)?;
    let count = r.u32()?;
    let feature_layer_index = r.u32()?;
    let mut layers = Vec::with_capacity(count);
    for i in 0..count {
        let layer = match r.u32()? {
            0 => {
                let rank = r.u32()?;
                let kernel = r.dims(rank)?;
                let stride = r.dims(rank)?;
                let padding = r.dims(rank)?;
                LayerSpec::Conv(ConvSpec {
                    kernel,
                    stride,
                    padding,
                    in_channels: r.u32()?,
                    out_channels: r.u32()?,
                })
            }
            1 => LayerSpec::Relu,
            2 => {
                let rank = r.u32()?;
                let window = r.dims(rank)?;
                let stride = r.dims(rank)?;
                LayerSpec::MaxPool(PoolSpec { window, stride })
            }
            3 => LayerSpec::Lrn(LrnSpec {
                neighborhood: r.u32()?,
                k: r.f64()?,
                alpha: r.f64()?,
                beta: r.f64()?,
            }),
            4 => LayerSpec::Affine { width: r.u32()? },
            5 => LayerSpec::Dropout { rate: r.f64()? },
            tag => return Err(Error::format(path, format!("layer {i}: unknown layer tag {tag}"))),
        };
        layers.push(layer);
    }
    let mut model = NetworkModel::new(&input_shape, layers, feature_layer_index, Init::Zeros)
        .map_err(|e| Error::format(path, e.to_string()))?;
    for i in 0..model.layers.len() {
        let Some(current) = model.params[i].as_ref() else {
            continue;
        };
        let wshape = current.weights.shape().to_vec();
        let bshape = current.bias.shape().to_vec();
        let mut blob = |shape: &[usize]| -> Result<Tensor<f32>> {
            let n = r.u64()?;
            let expected: usize = shape.iter().product();
            if n != expected {
                return Err(Error::format(
                    path,
                    format!("layer {i}: blob holds {n} values, layer needs {expected}"),
                ));
            }
            Tensor::new(shape.to_vec(), r.f32s(n)?)
        };
        let weights = blob(&wshape)?;
        let bias = blob(&bshape)?;
        model.set_params(i, Params { weights, bias })?;
    }
    if r.pos != bytes.len() {
        return Err(Error::format(path, format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(model)
}
