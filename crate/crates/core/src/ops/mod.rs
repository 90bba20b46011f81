//! Differentiable primitives used by the stream networks.
//!
//! Every op is a pure function over single-sample tensors laid out as
//! `[channels, spatial...]` with one or two spatial dimensions. Backward
//! functions take whatever the forward pass needs as explicit arguments; the
//! caller owns the activation cache.

mod affine;
mod conv;
mod dropout;
mod loss;
mod lrn;
mod pool;
mod relu;

pub use affine::{affine_backward, affine_forward, AffineGrads};
pub use conv::{conv_backward, conv_forward, ConvGrads, ConvSpec};
pub use dropout::{dropout, dropout_backward, Mode};
pub use loss::mse_loss;
pub use lrn::{lrn_backward, lrn_forward, LrnSpec};
pub use pool::{maxpool_backward, maxpool_forward, PoolSpec};
pub use relu::{relu, relu_backward};

use crate::{Error, Result};

/// Spatial extents of a `[channels, spatial...]` tensor viewed as a plane.
/// One-dimensional signals become a plane of height 1.
pub(crate) fn as_plane(shape: &[usize], what: &str) -> Result<(usize, usize, usize)> {
    match shape {
        [c, l] => Ok((*c, 1, *l)),
        [c, h, w] => Ok((*c, *h, *w)),
        _ => Err(Error::Shape(format!(
            "{what}: expected [channels, length] or [channels, height, width], got {shape:?}"
        ))),
    }
}

/// Lifts per-dimension parameters of a 1-D or 2-D op to plane form.
pub(crate) fn plane_pair(values: &[usize], fill: usize) -> (usize, usize) {
    match values {
        [l] => (fill, *l),
        [h, w] => (*h, *w),
        _ => (fill, fill),
    }
}
