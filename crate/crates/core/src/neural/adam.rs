use ndarray::{Array1, Array2};

use super::network::{Gradients, Network};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

#[derive(Debug, Clone)]
struct Moments {
    m_w: Array2<f64>,
    v_w: Array2<f64>,
    m_b: Array1<f64>,
    v_b: Array1<f64>,
}

/// Adam with bias correction. Each dense layer's step size is
/// `learning_rate · lr_multiplier`; layers with multiplier 0 are skipped.
#[derive(Debug, Clone)]
pub struct Adam {
    pub config: AdamConfig,
    pub step: u64,
    moments: Vec<Moments>,
}

impl Adam {
    pub fn new(config: AdamConfig, network: &Network) -> Self {
        let moments = network
            .dense_layers()
            .map(|d| Moments {
                m_w: Array2::zeros(d.weights.raw_dim()),
                v_w: Array2::zeros(d.weights.raw_dim()),
                m_b: Array1::zeros(d.bias.raw_dim()),
                v_b: Array1::zeros(d.bias.raw_dim()),
            })
            .collect();
        Self {
            config,
            step: 0,
            moments,
        }
    }

    pub fn apply(&mut self, network: &mut Network, grads: &Gradients) -> Result<()> {
        if grads.len() != self.moments.len() {
            return Err(Error::Shape(format!(
                "{} gradient sets for {} layers",
                grads.len(),
                self.moments.len()
            )));
        }
        self.step += 1;
        let AdamConfig {
            learning_rate,
            beta1,
            beta2,
            epsilon,
        } = self.config;
        let c1 = 1.0 - beta1.powi(self.step as i32);
        let c2 = 1.0 - beta2.powi(self.step as i32);

        for ((layer, g), mom) in network.dense_layers_mut().zip(grads).zip(&mut self.moments) {
            if g.weights.dim() != layer.weights.dim() || g.bias.dim() != layer.bias.dim() {
                return Err(Error::Shape("gradient shape differs from layer".into()));
            }
            if layer.lr_multiplier == 0.0 {
                continue;
            }
            let lr = learning_rate * layer.lr_multiplier;
            let update = |p: &mut f64, g: f64, m: &mut f64, v: &mut f64| {
                *m = beta1 * *m + (1.0 - beta1) * g;
                *v = beta2 * *v + (1.0 - beta2) * g * g;
                let m_hat = *m / c1;
                let v_hat = *v / c2;
                *p -= lr * m_hat / (v_hat.sqrt() + epsilon);
            };
            ndarray::Zip::from(&mut layer.weights)
                .and(&g.weights)
                .and(&mut mom.m_w)
                .and(&mut mom.v_w)
                .for_each(|p, &g, m, v| update(p, g, m, v));
            ndarray::Zip::from(&mut layer.bias)
                .and(&g.bias)
                .and(&mut mom.m_b)
                .and(&mut mom.v_b)
                .for_each(|p, &g, m, v| update(p, g, m, v));
        }
        Ok(())
    }
}
