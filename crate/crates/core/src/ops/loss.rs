use crate::{Error, Result};

/// Mean squared error and its gradient with respect to `pred`.
pub fn mse_loss(pred: &[f64], target: &[f64]) -> Result<(f64, Vec<f64>)> {
    if pred.is_empty() {
        return Err(Error::InvalidArgument("MSE of an empty batch".into()));
    }
    if pred.len() != target.len() {
        return Err(Error::Shape(format!(
            "MSE: {} predictions vs {} targets",
            pred.len(),
            target.len()
        )));
    }
    let n = pred.len() as f64;
    let loss = pred.iter().zip(target).map(|(p, t)| (p - t) * (p - t)).sum::<f64>() / n;
    let grad = pred.iter().zip(target).map(|(p, t)| 2.0 * (p - t) / n).collect();
    Ok((loss, grad))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn perfect_fit() {
        let (l, g) = mse_loss(&[1.0, -2.0], &[1.0, -2.0]).unwrap();
        assert_eq!(l, 0.0);
        assert_eq!(g, vec![0.0, 0.0]);
    }

    #[test]
    fn hand_values() {
        let (l, g) = mse_loss(&[3.0, 4.0], &[0.0, 0.0]).unwrap();
        assert_eq!(l, 12.5);
        assert_eq!(g, vec![3.0, 4.0]);
        let (l, g) = mse_loss(&[1.0], &[0.0]).unwrap();
        assert_eq!((l, g[0]), (1.0, 2.0));
    }

    #[test]
    fn empty_rejected() {
        assert!(mse_loss(&[], &[]).is_err());
    }
}
