use crate::ops::{as_plane, plane_pair};
use crate::{Error, Result, Scalar, Tensor};

/// Max-pool window and stride per spatial dimension (no padding).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct PoolSpec {
    pub window: Vec<usize>,
    pub stride: Vec<usize>,
}

impl PoolSpec {
    pub fn new(window: &[usize], stride: &[usize]) -> Self {
        Self {
            window: window.to_vec(),
            stride: stride.to_vec(),
        }
    }

    pub fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        let r = self.window.len();
        if !(1..=2).contains(&r) || self.stride.len() != r {
            return Err(Error::InvalidArgument(format!(
                "pool spec needs 1 or 2 dims, got window {:?} stride {:?}",
                self.window, self.stride
            )));
        }
        if self.window.contains(&0) || self.stride.contains(&0) {
            return Err(Error::InvalidArgument("pool window and stride must be positive".into()));
        }
        if input_shape.len() != r + 1 {
            return Err(Error::Shape(format!(
                "pool with {r} spatial dims cannot take input of shape {input_shape:?}"
            )));
        }
        let mut out = vec![input_shape[0]];
        for d in 0..r {
            let extent = input_shape[d + 1];
            if self.window[d] > extent {
                return Err(Error::Shape(format!(
                    "pool spatial dim {d}: window {} larger than input extent {extent}",
                    self.window[d]
                )));
            }
            out.push((extent - self.window[d]) / self.stride[d] + 1);
        }
        Ok(out)
    }
}

/// Returns the pooled tensor and, per output element, the linear input index
/// of its maximum (first occurrence on ties).
pub fn maxpool_forward<T: Scalar>(input: &Tensor<T>, spec: &PoolSpec) -> Result<(Tensor<T>, Vec<usize>)> {
    let out_shape = spec.output_shape(input.shape())?;
    let (c, h, w) = as_plane(input.shape(), "pool input")?;
    let (_, oh, ow) = as_plane(&out_shape, "pool output")?;
    let (wh, ww) = plane_pair(&spec.window, 1);
    let (sh, sw) = plane_pair(&spec.stride, 1);
    let x = input.data();
    let mut out = Vec::with_capacity(c * oh * ow);
    let mut argmax = Vec::with_capacity(c * oh * ow);
    for ch in 0..c {
        let base = ch * h * w;
        for oy in 0..oh {
            for ox in 0..ow {
                // Row-major scan with strict comparison keeps the lowest index on ties.
                let mut best = base + oy * sh * w + ox * sw;
                for dy in 0..wh {
                    let row = base + (oy * sh + dy) * w + ox * sw;
                    for dx in 0..ww {
                        if x[row + dx] > x[best] {
                            best = row + dx;
                        }
                    }
                }
                out.push(x[best]);
                argmax.push(best);
            }
        }
    }
    Ok((Tensor::new(out_shape, out)?, argmax))
}

pub fn maxpool_backward<T: Scalar>(grad_out: &Tensor<T>, argmax: &[usize], input_shape: &[usize]) -> Result<Tensor<T>> {
    if grad_out.len() != argmax.len() {
        return Err(Error::Shape(format!(
            "pool backward: {} gradients for {} pooled positions",
            grad_out.len(),
            argmax.len()
        )));
    }
    let mut gx = Tensor::zeros(input_shape);
    let n = gx.len();
    let buf = gx.data_mut();
    for (&g, &i) in grad_out.data().iter().zip(argmax) {
        if i >= n {
            return Err(Error::Shape(format!("pool backward: argmax {i} outside input of {n}")));
        }
        buf[i] = buf[i] + g;
    }
    Ok(gx)
}
