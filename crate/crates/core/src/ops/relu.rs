use crate::{Error, Result, Scalar, Tensor};

pub fn relu<T: Scalar>(input: &Tensor<T>) -> Tensor<T> {
    input.map(|v| if v > T::zero() { v } else { T::zero() })
}

/// Passes `grad` where the forward input was strictly positive.
pub fn relu_backward<T: Scalar>(input: &Tensor<T>, grad: &Tensor<T>) -> Result<Tensor<T>> {
    if input.shape() != grad.shape() {
        return Err(Error::Shape(format!(
            "relu backward: input {:?} vs grad {:?}",
            input.shape(),
            grad.shape()
        )));
    }
    let data = input
        .data()
        .iter()
        .zip(grad.data())
        .map(|(&x, &g)| if x > T::zero() { g } else { T::zero() })
        .collect();
    Tensor::new(input.shape().to_vec(), data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn clamps_negatives_and_zero() {
        let x = Tensor::from_vec(vec![-1.0f64, 0.0, 2.0]);
        assert_eq!(relu(&x).data(), &[0.0, 0.0, 2.0]);
    }

    #[test]
    fn identity_on_positives() {
        let x = Tensor::from_vec(vec![0.5f32, 3.0, 1e-6]);
        assert_eq!(relu(&x), x);
    }

    #[test]
    fn gate_semantics() {
        let x = Tensor::from_vec(vec![-1.0f64, 2.0]);
        let g = Tensor::from_vec(vec![5.0, 7.0]);
        assert_eq!(relu_backward(&x, &g).unwrap().data(), &[0.0, 7.0]);
        let x0 = Tensor::from_vec(vec![0.0f64]);
        let g0 = Tensor::from_vec(vec![3.0]);
        assert_eq!(relu_backward(&x0, &g0).unwrap().data(), &[0.0]);
    }
}
