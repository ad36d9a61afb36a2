//! Mean squared error with L2 weight penalty.

use ndarray::Array2;

use super::model::CnnModel;
use crate::error::{Error, Result};

/// Mean over batch and components of (pred - target)^2.
pub fn mse(pred: &Array2<f64>, target: &Array2<f64>) -> Result<f64> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mse: prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.len() as f64;
    let sum: f64 = pred
        .iter()
        .zip(target.iter())
        .map(|(p, t)| (p - t) * (p - t))
        .sum();
    Ok(sum / n)
}

/// Gradient of [`mse`] with respect to the prediction: 2 (pred - target) / n.
pub fn mse_grad(pred: &Array2<f64>, target: &Array2<f64>) -> Result<Array2<f64>> {
    if pred.dim() != target.dim() {
        return Err(Error::ShapeMismatch(format!(
            "mse_grad: prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.len() as f64;
    let mut grad = pred.clone();
    grad.zip_mut_with(target, |g, t| *g = 2.0 * (*g - t) / n);
    Ok(grad)
}

/// Training objective: data MSE plus `lambda` times the sum of squared
/// weights (kernels only; biases and batch norm scales are exempt).
pub fn mse_l2_loss(
    pred: &Array2<f64>,
    target: &Array2<f64>,
    model: &CnnModel,
    lambda: f64,
) -> Result<f64> {
    Ok(mse(pred, target)? + lambda * model.l2_weight_norm())
}
