use ndarray::Array2;

use crate::error::{Error, Result};

/// Mean of squared differences over every element, with gradient
/// `2 (pred - target) / N`.
pub fn mse_loss(pred: &Array2<f64>, target: &Array2<f64>) -> Result<(f64, Array2<f64>)> {
    if pred.dim() != target.dim() {
        return Err(Error::Shape(format!(
            "prediction {:?} vs target {:?}",
            pred.dim(),
            target.dim()
        )));
    }
    let n = pred.len().max(1) as f64;
    let diff = pred - target;
    let loss = diff.iter().map(|d| d * d).sum::<f64>() / n;
    Ok((loss, diff * (2.0 / n)))
}

pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy on raw logits, averaged over the batch, in the
/// overflow-free form `max(z, 0) - z·y + ln(1 + e^{-|z|})`.
///
/// `logits` is `[batch × 1]`; the gradient is `(σ(z) - y) / batch`.
pub fn bce_with_logits_loss(logits: &Array2<f64>, labels: &[f64]) -> Result<(f64, Array2<f64>)> {
    if logits.ncols() != 1 || logits.nrows() != labels.len() {
        return Err(Error::Shape(format!(
            "logits {:?} vs {} labels",
            logits.dim(),
            labels.len()
        )));
    }
    let n = labels.len().max(1) as f64;
    let mut loss = 0.0;
    let mut grad = Array2::zeros(logits.raw_dim());
    for (i, (&z, &y)) in logits.column(0).iter().zip(labels).enumerate() {
        loss += z.max(0.0) - z * y + (-z.abs()).exp().ln_1p();
        grad[[i, 0]] = (sigmoid(z) - y) / n;
    }
    Ok((loss / n, grad))
}
