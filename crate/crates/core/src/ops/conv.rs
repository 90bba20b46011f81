use crate::ops::{as_plane, plane_pair};
use crate::{Error, Result, Scalar, Tensor};

/// Geometry of a 1-D or 2-D convolution layer with symmetric zero padding.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConvSpec {
    pub kernel: Vec<usize>,
    pub stride: Vec<usize>,
    pub padding: Vec<usize>,
    pub in_channels: usize,
    pub out_channels: usize,
}

impl ConvSpec {
    /// Stride 1, no padding.
    pub fn new_2d(in_channels: usize, out_channels: usize, kernel: [usize; 2]) -> Self {
        Self {
            kernel: kernel.to_vec(),
            stride: vec![1, 1],
            padding: vec![0, 0],
            in_channels,
            out_channels,
        }
    }

    pub fn new_1d(in_channels: usize, out_channels: usize, kernel: usize, stride: usize) -> Self {
        Self {
            kernel: vec![kernel],
            stride: vec![stride],
            padding: vec![0],
            in_channels,
            out_channels,
        }
    }

    pub fn with_stride(mut self, stride: &[usize]) -> Self {
        self.stride = stride.to_vec();
        self
    }

    pub fn with_padding(mut self, padding: &[usize]) -> Self {
        self.padding = padding.to_vec();
        self
    }

    pub fn spatial_rank(&self) -> usize {
        self.kernel.len()
    }

    pub fn weight_shape(&self) -> Vec<usize> {
        let mut s = vec![self.out_channels, self.in_channels];
        s.extend_from_slice(&self.kernel);
        s
    }

    pub fn fan_in(&self) -> usize {
        self.in_channels * self.kernel.iter().product::<usize>()
    }

    fn validate(&self) -> Result<()> {
        let r = self.kernel.len();
        if !(1..=2).contains(&r) || self.stride.len() != r || self.padding.len() != r {
            return Err(Error::InvalidArgument(format!(
                "conv spec needs 1 or 2 spatial dims with matching stride/padding, got kernel {:?} stride {:?} padding {:?}",
                self.kernel, self.stride, self.padding
            )));
        }
        if self.kernel.contains(&0) || self.stride.contains(&0) {
            return Err(Error::InvalidArgument(
                "conv kernel and stride extents must be positive".into(),
            ));
        }
        if self.in_channels == 0 || self.out_channels == 0 {
            return Err(Error::InvalidArgument("conv channel counts must be positive".into()));
        }
        Ok(())
    }

    /// Output shape `[out_channels, spatial...]` for a `[in_channels, spatial...]` input.
    pub fn output_shape(&self, input_shape: &[usize]) -> Result<Vec<usize>> {
        self.validate()?;
        if input_shape.len() != self.spatial_rank() + 1 {
            return Err(Error::Shape(format!(
                "conv with {} spatial dims cannot take input of shape {input_shape:?}",
                self.spatial_rank()
            )));
        }
        if input_shape[0] != self.in_channels {
            return Err(Error::Shape(format!(
                "conv channel dim: input has {} channels, spec expects {}",
                input_shape[0], self.in_channels
            )));
        }
        let mut out = vec![self.out_channels];
        for d in 0..self.spatial_rank() {
            let padded = input_shape[d + 1] + 2 * self.padding[d];
            if self.kernel[d] > padded {
                return Err(Error::Shape(format!(
                    "conv spatial dim {d}: kernel {} exceeds padded input extent {padded}",
                    self.kernel[d]
                )));
            }
            out.push((padded - self.kernel[d]) / self.stride[d] + 1);
        }
        Ok(out)
    }
}

#[derive(Debug, Clone, Copy)]
struct Geometry {
    cin: usize,
    cout: usize,
    h: usize,
    w: usize,
    kh: usize,
    kw: usize,
    sh: usize,
    sw: usize,
    ph: usize,
    pw: usize,
    oh: usize,
    ow: usize,
}

impl Geometry {
    fn new(input_shape: &[usize], weights: &Tensor<impl Scalar>, spec: &ConvSpec) -> Result<(Self, Vec<usize>)> {
        let out_shape = spec.output_shape(input_shape)?;
        if weights.shape() != spec.weight_shape().as_slice() {
            return Err(Error::Shape(format!(
                "conv weights: shape {:?}, expected {:?}",
                weights.shape(),
                spec.weight_shape()
            )));
        }
        let (cin, h, w) = as_plane(input_shape, "conv input")?;
        let (_, oh, ow) = as_plane(&out_shape, "conv output")?;
        let (kh, kw) = plane_pair(&spec.kernel, 1);
        let (sh, sw) = plane_pair(&spec.stride, 1);
        let (ph, pw) = plane_pair(&spec.padding, 0);
        Ok((
            Self {
                cin,
                cout: spec.out_channels,
                h,
                w,
                kh,
                kw,
                sh,
                sw,
                ph,
                pw,
                oh,
                ow,
            },
            out_shape,
        ))
    }

    /// Input row hit by output row `oy` and kernel row `ky`, if inside the image.
    #[inline]
    fn input_row(&self, oy: usize, ky: usize) -> Option<usize> {
        (oy * self.sh + ky).checked_sub(self.ph).filter(|&r| r < self.h)
    }

    /// Range of output columns whose tap `kx` lands inside the image.
    #[inline]
    fn column_range(&self, kx: usize) -> (usize, usize) {
        let lo = if self.pw > kx {
            (self.pw - kx).div_ceil(self.sw)
        } else {
            0
        };
        let hi = if self.w + self.pw > kx {
            ((self.w - 1 + self.pw - kx) / self.sw + 1).min(self.ow)
        } else {
            0
        };
        (lo, hi.max(lo))
    }
}

impl Geometry {
    fn taps(&self) -> usize {
        self.cin * self.kh * self.kw
    }

    fn plane(&self) -> usize {
        self.oh * self.ow
    }

    /// Patch matrix `[taps, plane]`: row `(ic, ky, kx)` holds the input value
    /// each output position reads through that tap (0 in the padding).
    fn im2col<T: Scalar>(&self, x: &[T]) -> Vec<f64> {
        let plane = self.plane();
        let mut cols = vec![0f64; self.taps() * plane];
        for ic in 0..self.cin {
            let x_c = &x[ic * self.h * self.w..(ic + 1) * self.h * self.w];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let tap = (ic * self.kh + ky) * self.kw + kx;
                    let dst = &mut cols[tap * plane..(tap + 1) * plane];
                    let (lo, hi) = self.column_range(kx);
                    for oy in 0..self.oh {
                        let Some(iy) = self.input_row(oy, ky) else { continue };
                        let row = &x_c[iy * self.w..(iy + 1) * self.w];
                        let d = &mut dst[oy * self.ow..(oy + 1) * self.ow];
                        for ox in lo..hi {
                            d[ox] = row[ox * self.sw + kx - self.pw].as_f64();
                        }
                    }
                }
            }
        }
        cols
    }

    /// Adjoint of [`Geometry::im2col`]: scatters patch gradients back onto the input.
    fn col2im(&self, cols: &[f64], gx: &mut [f64]) {
        let plane = self.plane();
        for ic in 0..self.cin {
            let g_c = &mut gx[ic * self.h * self.w..(ic + 1) * self.h * self.w];
            for ky in 0..self.kh {
                for kx in 0..self.kw {
                    let tap = (ic * self.kh + ky) * self.kw + kx;
                    let src = &cols[tap * plane..(tap + 1) * plane];
                    let (lo, hi) = self.column_range(kx);
                    for oy in 0..self.oh {
                        let Some(iy) = self.input_row(oy, ky) else { continue };
                        let row = &mut g_c[iy * self.w..(iy + 1) * self.w];
                        let s = &src[oy * self.ow..(oy + 1) * self.ow];
                        for ox in lo..hi {
                            row[ox * self.sw + kx - self.pw] += s[ox];
                        }
                    }
                }
            }
        }
    }
}

/// Cross-correlation of `input` with each filter, plus per-channel bias.
pub fn conv_forward<T: Scalar>(
    input: &Tensor<T>,
    weights: &Tensor<T>,
    bias: &[T],
    spec: &ConvSpec,
) -> Result<Tensor<T>> {
    let (g, out_shape) = Geometry::new(input.shape(), weights, spec)?;
    if bias.len() != g.cout {
        return Err(Error::Shape(format!(
            "conv bias: length {}, expected {}",
            bias.len(),
            g.cout
        )));
    }
    let cols = g.im2col(input.data());
    let wt = weights.data();
    let (taps, plane) = (g.taps(), g.plane());
    let mut out = Vec::with_capacity(g.cout * plane);
    let mut acc = vec![0f64; plane];
    for oc in 0..g.cout {
        acc.fill(bias[oc].as_f64());
        for (k, &w) in wt[oc * taps..(oc + 1) * taps].iter().enumerate() {
            let wv = w.as_f64();
            for (a, &c) in acc.iter_mut().zip(&cols[k * plane..(k + 1) * plane]) {
                *a += wv * c;
            }
        }
        out.extend(acc.iter().map(|&v| T::from_f64(v)));
    }
    Tensor::new(out_shape, out)
}

#[derive(Debug, Clone)]
pub struct ConvGrads<T> {
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

pub fn conv_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cached_input: &Tensor<T>,
    weights: &Tensor<T>,
    spec: &ConvSpec,
) -> Result<ConvGrads<T>> {
    let (g, out_shape) = Geometry::new(cached_input.shape(), weights, spec)?;
    if grad_out.shape() != out_shape.as_slice() {
        return Err(Error::Shape(format!(
            "conv backward: grad_out shape {:?}, forward output shape {out_shape:?}",
            grad_out.shape()
        )));
    }
    let cols = g.im2col(cached_input.data());
    let wt = weights.data();
    let (taps, plane) = (g.taps(), g.plane());
    let go: Vec<f64> = grad_out.data().iter().map(|v| v.as_f64()).collect();
    let mut gw = vec![0f64; wt.len()];
    let mut gb = vec![0f64; g.cout];
    let mut gcols = vec![0f64; taps * plane];
    for oc in 0..g.cout {
        let go_c = &go[oc * plane..(oc + 1) * plane];
        gb[oc] = go_c.iter().sum();
        for k in 0..taps {
            let col = &cols[k * plane..(k + 1) * plane];
            gw[oc * taps + k] = col.iter().zip(go_c).map(|(a, b)| a * b).sum();
            let wv = wt[oc * taps + k].as_f64();
            for (d, &v) in gcols[k * plane..(k + 1) * plane].iter_mut().zip(go_c) {
                *d += wv * v;
            }
        }
    }
    let mut gx = vec![0f64; cached_input.len()];
    g.col2im(&gcols, &mut gx);
    Ok(ConvGrads {
        input: Tensor::new(cached_input.shape().to_vec(), gx.into_iter().map(T::from_f64).collect())?,
        weights: Tensor::new(weights.shape().to_vec(), gw.into_iter().map(T::from_f64).collect())?,
        bias: gb.into_iter().map(T::from_f64).collect(),
    })
}
