//! Dense reconstruction autoencoder (`D → 64 → 64 → 8 → 64 → 64 → D`).
//!
//! Trained on normal context windows only; a clip's anomaly score is the
//! mean over its windows of the per-window reconstruction MSE, measured in
//! dB² after undoing input standardization.

use ndarray::{Array2, Axis};

use crate::dsp::WindowBatch;
use crate::error::{Error, Result};
use crate::formats::{BinReader, BinWriter};
use crate::neural::{
    minibatches, mse_loss, read_standardizer, seeded, write_standardizer, Adam, AdamConfig,
    DenseLayer, Network, Stage, Standardizer,
};

pub const HIDDEN_DIM: usize = 64;
pub const BOTTLENECK_DIM: usize = 8;

const MAGIC: &[u8; 4] = b"FAEM";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct AutoencoderModel {
    pub network: Network,
    pub standardizer: Option<Standardizer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AeTrainConfig {
    pub input_dim: usize,
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Fit per-feature mean/std on the training windows and train in the
    /// standardized space. Off reproduces the raw-dB baseline.
    pub standardize: bool,
}

impl Default for AeTrainConfig {
    fn default() -> Self {
        Self {
            input_dim: 320,
            epochs: 50,
            batch_size: 512,
            adam: AdamConfig::default(),
            seed: 0,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Mean training loss of each epoch.
    pub loss_history: Vec<f64>,
}

impl AutoencoderModel {
    /// Fresh network with ReLU after every layer except the linear output.
    pub fn build(input_dim: usize, seed: u64) -> Self {
        let mut rng = seeded(seed);
        let dims = [
            input_dim,
            HIDDEN_DIM,
            HIDDEN_DIM,
            BOTTLENECK_DIM,
            HIDDEN_DIM,
            HIDDEN_DIM,
            input_dim,
        ];
        let mut stages = Vec::new();
        for (i, w) in dims.windows(2).enumerate() {
            stages.push(Stage::Dense(DenseLayer::init_uniform(w[0], w[1], &mut rng)));
            if i + 2 < dims.len() {
                stages.push(Stage::Relu);
            }
        }
        Self {
            network: Network::new(stages),
            standardizer: None,
        }
    }

    pub fn input_dim(&self) -> usize {
        self.network.in_dim().unwrap_or(0)
    }

    /// Reconstructions in the input (dB) space.
    pub fn reconstruct(&self, windows: &Array2<f64>) -> Result<Array2<f64>> {
        match &self.standardizer {
            Some(s) => Ok(s.inverse(&self.network.forward(s.transform(windows).view())?)),
            None => self.network.forward(windows.view()),
        }
    }

    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BinWriter::new();
        w.bytes(MAGIC).u8(VERSION);
        w.bytes(&self.network.to_bytes());
        write_standardizer(&mut w, self.standardizer.as_ref());
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let mut r = BinReader::new(bytes);
        r.expect_magic(MAGIC)?;
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::parse(format!("unsupported autoencoder version {version}")));
        }
        let network = Network::read_from(&mut r)?;
        let standardizer = read_standardizer(&mut r)?;
        r.finish()?;
        Ok(Self {
            network,
            standardizer,
        })
    }
}

fn stack(batches: &[WindowBatch], width: usize) -> Result<Array2<f64>> {
    let total: usize = batches.iter().map(WindowBatch::n_windows).sum();
    if total == 0 {
        return Err(Error::Empty("no training windows".into()));
    }
    let mut out = Array2::zeros((total, width));
    let mut row = 0;
    for b in batches {
        if b.width() != width {
            return Err(Error::Shape(format!(
                "window width {} does not match model input {width}",
                b.width()
            )));
        }
        out.slice_mut(ndarray::s![row..row + b.n_windows(), ..])
            .assign(&b.data.mapv(f64::from));
        row += b.n_windows();
    }
    Ok(out)
}

/// Trains on the pooled windows of all normal clips with shuffled
/// mini-batches and MSE loss.
pub fn train_autoencoder(
    normal_windows: &[WindowBatch],
    cfg: &AeTrainConfig,
) -> Result<(AutoencoderModel, TrainReport)> {
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let raw = stack(normal_windows, cfg.input_dim)?;
    let mut model = AutoencoderModel::build(cfg.input_dim, cfg.seed);
    let data = if cfg.standardize {
        let s = Standardizer::fit(&raw)?;
        let z = s.transform(&raw);
        model.standardizer = Some(s);
        z
    } else {
        raw
    };

    // Separate stream from the init stream so epochs=0 equals `build`.
    let mut rng = seeded(cfg.seed ^ 0x5eed_0f_ae);
    let mut adam = Adam::new(cfg.adam, &model.network);
    let mut loss_history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for batch in minibatches(data.nrows(), cfg.batch_size, &mut rng) {
            let x = data.select(Axis(0), &batch);
            let (out, trace) = model.network.forward_train(x.view(), &mut rng)?;
            let (loss, grad) = mse_loss(&out, &x)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("autoencoder loss diverged in epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            let grads = model.network.backward(&trace, grad);
            adam.apply(&mut model.network, &grads)?;
        }
        loss_history.push(total / data.nrows() as f64);
    }
    Ok((model, TrainReport { loss_history }))
}

/// Per-window reconstruction MSE.
pub fn window_errors(model: &AutoencoderModel, clip_windows: &WindowBatch) -> Result<Vec<f64>> {
    if clip_windows.n_windows() == 0 {
        return Err(Error::Empty("clip has no windows".into()));
    }
    if clip_windows.width() != model.input_dim() {
        return Err(Error::Shape(format!(
            "window width {} does not match model input {}",
            clip_windows.width(),
            model.input_dim()
        )));
    }
    let x = clip_windows.data.mapv(f64::from);
    let recon = model.reconstruct(&x)?;
    let width = x.ncols() as f64;
    Ok((&recon - &x)
        .rows()
        .into_iter()
        .map(|r| r.iter().map(|d| d * d).sum::<f64>() / width)
        .collect())
}

/// Mean reconstruction error over a clip's windows; higher is more
/// anomalous.
pub fn score_clip(model: &AutoencoderModel, clip_windows: &WindowBatch) -> Result<f64> {
    let errors = window_errors(model, clip_windows)?;
    Ok(errors.iter().sum::<f64>() / errors.len() as f64)
}
