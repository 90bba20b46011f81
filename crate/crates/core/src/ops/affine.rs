use crate::{Error, Result, Scalar, Tensor};

/// `y = W x + b` with `W` stored as `[outputs, inputs]`. The input is
/// flattened, whatever its shape.
pub fn affine_forward<T: Scalar>(input: &Tensor<T>, weights: &Tensor<T>, bias: &[T]) -> Result<Tensor<T>> {
    let (outputs, inputs) = dims(weights, input.len(), bias.len())?;
    let x = input.data();
    let w = weights.data();
    let y = (0..outputs)
        .map(|o| {
            let row = &w[o * inputs..(o + 1) * inputs];
            let dot: f64 = row.iter().zip(x).map(|(&a, &b)| a.as_f64() * b.as_f64()).sum();
            T::from_f64(dot + bias[o].as_f64())
        })
        .collect();
    Tensor::new(vec![outputs], y)
}

#[derive(Debug, Clone)]
pub struct AffineGrads<T> {
    /// Gradient with respect to the input, in the input's original shape.
    pub input: Tensor<T>,
    pub weights: Tensor<T>,
    pub bias: Vec<T>,
}

pub fn affine_backward<T: Scalar>(
    grad_out: &Tensor<T>,
    cached_input: &Tensor<T>,
    weights: &Tensor<T>,
) -> Result<AffineGrads<T>> {
    let (outputs, inputs) = dims(weights, cached_input.len(), grad_out.len())?;
    let x = cached_input.data();
    let w = weights.data();
    let g = grad_out.data();
    let mut gx = vec![0f64; inputs];
    let mut gw = Vec::with_capacity(outputs * inputs);
    for o in 0..outputs {
        let go = g[o].as_f64();
        let row = &w[o * inputs..(o + 1) * inputs];
        for (acc, &wv) in gx.iter_mut().zip(row) {
            *acc += go * wv.as_f64();
        }
        gw.extend(x.iter().map(|&xv| T::from_f64(go * xv.as_f64())));
    }
    Ok(AffineGrads {
        input: Tensor::new(cached_input.shape().to_vec(), gx.into_iter().map(T::from_f64).collect())?,
        weights: Tensor::new(vec![outputs, inputs], gw)?,
        bias: g.to_vec(),
    })
}

fn dims<T: Scalar>(weights: &Tensor<T>, input_len: usize, out_len: usize) -> Result<(usize, usize)> {
    let &[outputs, inputs] = weights.shape() else {
        return Err(Error::Shape(format!(
            "affine weights must be a matrix, got shape {:?}",
            weights.shape()
        )));
    };
    if inputs != input_len {
        return Err(Error::Shape(format!(
            "affine inner dimension: weights take {inputs} inputs, flattened input has {input_len}"
        )));
    }
    if out_len != outputs {
        return Err(Error::Shape(format!(
            "affine output dimension: weights give {outputs} outputs, got {out_len}"
        )));
    }
    Ok((outputs, inputs))
}
