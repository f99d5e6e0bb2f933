use ndarray::{Array1, Array2, ArrayView2, Axis};
use rand::Rng as _;

use super::rng::Rng;
use crate::error::{Error, Result};

/// Fully connected layer computing `x · Wᵀ + b`.
#[derive(Debug, Clone, PartialEq)]
pub struct DenseLayer {
    /// `[out × in]`.
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
    /// Scales the optimizer's learning rate for this layer; 0 freezes it.
    pub lr_multiplier: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct DenseGrads {
    pub weights: Array2<f64>,
    pub bias: Array1<f64>,
}

impl DenseLayer {
    /// Weights uniform in `±1/√fan_in`, zero bias.
    pub fn init_uniform(in_dim: usize, out_dim: usize, rng: &mut Rng) -> Self {
        let bound = 1.0 / (in_dim as f64).sqrt();
        let weights = Array2::from_shape_simple_fn((out_dim, in_dim), || {
            rng.random_range(-bound..=bound)
        });
        Self {
            weights,
            bias: Array1::zeros(out_dim),
            lr_multiplier: 1.0,
        }
    }

    pub fn in_dim(&self) -> usize {
        self.weights.ncols()
    }

    pub fn out_dim(&self) -> usize {
        self.weights.nrows()
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len() + self.bias.len()
    }

    pub fn forward(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        if input.ncols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "dense layer expects width {}, got {}",
                self.in_dim(),
                input.ncols()
            )));
        }
        Ok(input.dot(&self.weights.t()) + &self.bias)
    }

    /// Parameter gradients and the gradient with respect to `input`.
    pub fn backward(&self, input: ArrayView2<f64>, grad_out: ArrayView2<f64>) -> (DenseGrads, Array2<f64>) {
        let grads = DenseGrads {
            weights: grad_out.t().dot(&input),
            bias: grad_out.sum_axis(Axis(0)),
        };
        (grads, grad_out.dot(&self.weights))
    }

    pub fn is_finite(&self) -> bool {
        self.weights.iter().chain(self.bias.iter()).all(|v| v.is_finite())
    }
}

pub fn relu_forward(x: &Array2<f64>) -> Array2<f64> {
    x.mapv(|v| v.max(0.0))
}

/// Passes gradient where the forward input was strictly positive.
pub fn relu_backward(input: &Array2<f64>, grad_out: &Array2<f64>) -> Array2<f64> {
    let mut g = grad_out.clone();
    g.zip_mut_with(input, |g, &x| {
        if x <= 0.0 {
            *g = 0.0
        }
    });
    g
}

/// Inverted dropout. Returns the output and the per-unit multiplier
/// (0 or `1/(1-p)`) needed for the backward pass. Inference mode, or
/// `p == 0`, is the identity.
pub fn dropout_forward(x: &Array2<f64>, p: f64, training: bool, rng: &mut Rng) -> (Array2<f64>, Option<Array2<f64>>) {
    if !training || p == 0.0 {
        return (x.clone(), None);
    }
    let keep = 1.0 / (1.0 - p);
    let mask = Array2::from_shape_simple_fn(x.raw_dim(), || {
        if rng.random::<f64>() < p {
            0.0
        } else {
            keep
        }
    });
    (x * &mask, Some(mask))
}
