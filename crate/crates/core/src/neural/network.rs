use ndarray::{Array2, ArrayView2};

use super::layers::{dropout_forward, relu_backward, relu_forward, DenseGrads, DenseLayer};
use super::rng::Rng;
use crate::error::{Error, Result};
use crate::formats::{BinReader, BinWriter};

#[derive(Debug, Clone, PartialEq)]
pub enum Stage {
    Dense(DenseLayer),
    Relu,
    Dropout { p: f64 },
}

/// A feed-forward stack of stages applied in order.
#[derive(Debug, Clone, PartialEq)]
pub struct Network {
    pub stages: Vec<Stage>,
}

/// Saved activations from a training-mode forward pass.
#[derive(Debug)]
pub struct Trace {
    inputs: Vec<Array2<f64>>,
    masks: Vec<Option<Array2<f64>>>,
}

/// One gradient entry per dense layer, in stage order.
pub type Gradients = Vec<DenseGrads>;

const MAGIC: &[u8; 4] = b"FNET";
const VERSION: u8 = 1;

impl Network {
    pub fn new(stages: Vec<Stage>) -> Self {
        Self { stages }
    }

    pub fn dense_layers(&self) -> impl Iterator<Item = &DenseLayer> {
        self.stages.iter().filter_map(|s| match s {
            Stage::Dense(d) => Some(d),
            _ => None,
        })
    }

    pub fn dense_layers_mut(&mut self) -> impl Iterator<Item = &mut DenseLayer> {
        self.stages.iter_mut().filter_map(|s| match s {
            Stage::Dense(d) => Some(d),
            _ => None,
        })
    }

    pub fn in_dim(&self) -> Option<usize> {
        self.dense_layers().next().map(DenseLayer::in_dim)
    }

    pub fn out_dim(&self) -> Option<usize> {
        self.dense_layers().last().map(DenseLayer::out_dim)
    }

    pub fn parameter_count(&self) -> usize {
        self.dense_layers().map(DenseLayer::parameter_count).sum()
    }

    /// Sets per-layer learning-rate multipliers, first dense layer first.
    pub fn set_lr_multipliers(&mut self, multipliers: &[f64]) -> Result<()> {
        let n = self.dense_layers().count();
        if multipliers.len() != n {
            return Err(Error::Config(format!(
                "{} multipliers for {n} dense layers",
                multipliers.len()
            )));
        }
        if multipliers.iter().any(|m| !(m.is_finite() && *m >= 0.0)) {
            return Err(Error::Config("learning-rate multipliers must be finite and >= 0".into()));
        }
        for (layer, &m) in self.dense_layers_mut().zip(multipliers) {
            layer.lr_multiplier = m;
        }
        Ok(())
    }

    /// Inference pass; dropout is the identity.
    pub fn forward(&self, input: ArrayView2<f64>) -> Result<Array2<f64>> {
        let mut x = input.to_owned();
        for stage in &self.stages {
            x = match stage {
                Stage::Dense(d) => d.forward(x.view())?,
                Stage::Relu => relu_forward(&x),
                Stage::Dropout { .. } => x,
            };
        }
        Ok(x)
    }

    pub fn forward_train(&self, input: ArrayView2<f64>, rng: &mut Rng) -> Result<(Array2<f64>, Trace)> {
        let mut trace = Trace {
            inputs: Vec::with_capacity(self.stages.len()),
            masks: Vec::with_capacity(self.stages.len()),
        };
        let mut x = input.to_owned();
        for stage in &self.stages {
            let (next, mask) = match stage {
                Stage::Dense(d) => (d.forward(x.view())?, None),
                Stage::Relu => (relu_forward(&x), None),
                Stage::Dropout { p } => dropout_forward(&x, *p, true, rng),
            };
            trace.inputs.push(x);
            trace.masks.push(mask);
            x = next;
        }
        Ok((x, trace))
    }

    pub fn backward(&self, trace: &Trace, grad_out: Array2<f64>) -> Gradients {
        let mut grads = Vec::new();
        let mut g = grad_out;
        for (i, stage) in self.stages.iter().enumerate().rev() {
            let input = &trace.inputs[i];
            g = match stage {
                Stage::Dense(d) => {
                    let (pg, gin) = d.backward(input.view(), g.view());
                    grads.push(pg);
                    gin
                }
                Stage::Relu => relu_backward(input, &g),
                Stage::Dropout { .. } => match &trace.masks[i] {
                    Some(mask) => g * mask,
                    None => g,
                },
            };
        }
        grads.reverse();
        grads
    }

    pub fn is_finite(&self) -> bool {
        self.dense_layers().all(DenseLayer::is_finite)
    }

    /// Binary container: magic, version byte, stage count, then per stage a
    /// tag byte (0 dense, 1 relu, 2 dropout) and its payload. Dense layers
    /// store out/in dims, lr multiplier, weights row-major and bias, all
    /// little-endian `f64`.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BinWriter::new();
        w.bytes(MAGIC).u8(VERSION).u32(self.stages.len() as u32);
        for stage in &self.stages {
            match stage {
                Stage::Dense(d) => {
                    w.u8(0)
                        .u32(d.out_dim() as u32)
                        .u32(d.in_dim() as u32)
                        .f64(d.lr_multiplier);
                    for &v in d.weights.iter().chain(d.bias.iter()) {
                        w.f64(v);
                    }
                }
                Stage::Relu => {
                    w.u8(1);
                }
                Stage::Dropout { p } => {
                    w.u8(2).f64(*p);
                }
            }
        }
        w.finish()
    }

    pub fn read_from(r: &mut BinReader<'_>) -> Result<Self> {
        r.expect_magic(MAGIC)?;
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::parse(format!("unsupported network version {version}")));
        }
        let n = r.u32()? as usize;
        let mut stages = Vec::with_capacity(n.min(1024));
        for _ in 0..n {
            stages.push(match r.u8()? {
                0 => {
                    let out = r.u32()? as usize;
                    let inp = r.u32()? as usize;
                    let lr_multiplier = r.f64()?;
                    let weights = Array2::from_shape_vec((out, inp), r.f64_vec(out * inp)?)
                        .map_err(|e| Error::parse(e.to_string()))?;
                    let bias = r.f64_vec(out)?.into();
                    Stage::Dense(DenseLayer {
                        weights,
                        bias,
                        lr_multiplier,
                    })
                }
                1 => Stage::Relu,
                2 => Stage::Dropout { p: r.f64()? },
                tag => return Err(Error::parse(format!("unknown stage tag {tag}"))),
            });
        }
        Ok(Self { stages })
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = BinReader::new(bytes);
        let net = Self::read_from(&mut r)?;
        r.finish()?;
        Ok(net)
    }
}
