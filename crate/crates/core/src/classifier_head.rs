//! Supervised detection head over clip embeddings:
//! `Linear(D, 256) → Dropout(0.1) → ReLU → Linear(256, 1)`, trained with
//! BCE-with-logits and Adam.

use ndarray::{Array2, Axis};

pub use crate::embedding::{EmbeddingSet, Label};
use crate::error::{Error, Result};
use crate::formats::{BinReader, BinWriter};
use crate::neural::{
    bce_with_logits_loss, minibatches, read_standardizer, seeded, sigmoid, write_standardizer,
    Adam, AdamConfig, DenseLayer, Network, Stage, Standardizer,
};

pub const HIDDEN_DIM: usize = 256;
pub const DROPOUT_P: f64 = 0.1;

const MAGIC: &[u8; 4] = b"FHED";
const VERSION: u8 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct ClassifierHead {
    pub network: Network,
    pub standardizer: Option<Standardizer>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct HeadTrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub adam: AdamConfig,
    pub seed: u64,
    /// Standardize each embedding dimension with train-set statistics.
    pub standardize: bool,
    /// Per-dense-layer learning-rate multipliers, first layer first.
    pub lr_multipliers: Option<Vec<f64>>,
}

impl Default for HeadTrainConfig {
    fn default() -> Self {
        Self {
            epochs: 1,
            batch_size: 64,
            adam: AdamConfig::default(),
            seed: 0,
            standardize: false,
            lr_multipliers: None,
        }
    }
}

/// A freshly initialized head for `in_dim`-dimensional embeddings.
pub fn build_head(in_dim: usize, seed: u64) -> Result<ClassifierHead> {
    if in_dim == 0 {
        return Err(Error::Config("embedding dimension must be at least 1".into()));
    }
    let mut rng = seeded(seed);
    let network = Network::new(vec![
        Stage::Dense(DenseLayer::init_uniform(in_dim, HIDDEN_DIM, &mut rng)),
        Stage::Dropout { p: DROPOUT_P },
        Stage::Relu,
        Stage::Dense(DenseLayer::init_uniform(HIDDEN_DIM, 1, &mut rng)),
    ]);
    Ok(ClassifierHead {
        network,
        standardizer: None,
    })
}

impl ClassifierHead {
    pub fn in_dim(&self) -> usize {
        self.network.in_dim().unwrap_or(0)
    }

    pub fn logits(&self, vectors: &Array2<f64>) -> Result<Vec<f64>> {
        if vectors.ncols() != self.in_dim() {
            return Err(Error::Shape(format!(
                "embedding dim {} does not match head input {}",
                vectors.ncols(),
                self.in_dim()
            )));
        }
        let out = match &self.standardizer {
            Some(s) => self.network.forward(s.transform(vectors).view())?,
            None => self.network.forward(vectors.view())?,
        };
        Ok(out.column(0).to_vec())
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
            return Err(Error::parse(format!("unsupported head version {version}")));
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

/// Trains on the labeled rows of `set` (unlabeled rows are ignored).
/// Returns the head and the mean loss of each epoch.
pub fn train_head(
    mut head: ClassifierHead,
    set: &EmbeddingSet,
    cfg: &HeadTrainConfig,
) -> Result<(ClassifierHead, Vec<f64>)> {
    if set.dim() != head.in_dim() {
        return Err(Error::Shape(format!(
            "embedding dim {} does not match head input {}",
            set.dim(),
            head.in_dim()
        )));
    }
    if cfg.batch_size == 0 {
        return Err(Error::Config("batch size must be positive".into()));
    }
    let labeled: Vec<usize> = (0..set.len())
        .filter(|&i| set.labels[i] != Label::Unlabeled)
        .collect();
    let targets: Vec<f64> = labeled
        .iter()
        .map(|&i| set.labels[i].target().expect("labeled"))
        .collect();
    let positives = targets.iter().filter(|&&t| t == 1.0).count();
    if positives == 0 || positives == targets.len() {
        return Err(Error::DegenerateLabels(format!(
            "training needs both classes; got {positives} anomalous of {}",
            targets.len()
        )));
    }
    if cfg.epochs == 0 {
        return Ok((head, Vec::new()));
    }
    if let Some(m) = &cfg.lr_multipliers {
        head.network.set_lr_multipliers(m)?;
    }
    let raw = set.vectors.select(Axis(0), &labeled);
    let data = if cfg.standardize {
        let s = Standardizer::fit(&raw)?;
        let z = s.transform(&raw);
        head.standardizer = Some(s);
        z
    } else {
        head.standardizer = None;
        raw
    };

    let mut rng = seeded(cfg.seed ^ 0x4ead_5eed);
    let mut adam = Adam::new(cfg.adam, &head.network);
    let mut history = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        let mut total = 0.0;
        for batch in minibatches(data.nrows(), cfg.batch_size, &mut rng) {
            let x = data.select(Axis(0), &batch);
            let y: Vec<f64> = batch.iter().map(|&i| targets[i]).collect();
            let (logits, trace) = head.network.forward_train(x.view(), &mut rng)?;
            let (loss, grad) = bce_with_logits_loss(&logits, &y)?;
            if !loss.is_finite() {
                return Err(Error::NonFinite(format!("head loss diverged in epoch {epoch}")));
            }
            total += loss * batch.len() as f64;
            let grads = head.network.backward(&trace, grad);
            adam.apply(&mut head.network, &grads)?;
        }
        history.push(total / data.nrows() as f64);
    }
    Ok((head, history))
}

/// Anomaly probabilities `σ(logit)` per clip.
pub fn score(head: &ClassifierHead, set: &EmbeddingSet) -> Result<Vec<f64>> {
    Ok(head.logits(&set.vectors)?.into_iter().map(sigmoid).collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::eval::roc_auc;
    use rand_distr::{Distribution, Normal};

    fn gaussian_pair(n_normal: usize, n_anom: usize, dim: usize, gap: f64, seed: u64) -> EmbeddingSet {
        let mut rng = seeded(seed);
        let unit = Normal::new(0.0, 1.0).unwrap();
        let n = n_normal + n_anom;
        let mut labels = Vec::with_capacity(n);
        let vectors = Array2::from_shape_fn((n, dim), |(i, j)| {
            let shift = if i >= n_normal && j == 0 { gap } else { 0.0 };
            unit.sample(&mut rng) + shift
        });
        for i in 0..n {
            labels.push(if i < n_normal { Label::Normal } else { Label::Anomalous });
        }
        let ids = (0..n).map(|i| format!("c{i}")).collect();
        EmbeddingSet::new(vectors, ids, labels, "synthetic").unwrap()
    }

    #[test]
    fn paper_head_parameter_count() {
        let head = build_head(2048, 0).unwrap();
        assert_eq!(head.network.parameter_count(), 524_801);
        let kinds: Vec<&str> = head
            .network
            .stages
            .iter()
            .map(|s| match s {
                Stage::Dense(_) => "dense",
                Stage::Dropout { .. } => "dropout",
                Stage::Relu => "relu",
            })
            .collect();
        assert_eq!(kinds, ["dense", "dropout", "relu", "dense"]);
        assert!(build_head(0, 0).is_err());
    }

    #[test]
    fn zero_input_with_zero_bias_gives_zero_logit() {
        let head = build_head(4, 3).unwrap();
        let logits = head.logits(&Array2::zeros((1, 4))).unwrap();
        assert_eq!(logits, vec![0.0]);
        let set = EmbeddingSet::new(Array2::zeros((1, 4)), vec!["z".into()], vec![Label::Unlabeled], "t").unwrap();
        assert_eq!(score(&head, &set).unwrap(), vec![0.5]);
    }

    #[test]
    fn inference_is_deterministic() {
        let set = gaussian_pair(20, 20, 8, 2.0, 1);
        let head = build_head(8, 1).unwrap();
        assert_eq!(score(&head, &set).unwrap(), score(&head, &set).unwrap());
    }

    #[test]
    fn separable_embeddings_train_in_one_epoch() {
        let train = gaussian_pair(2000, 2000, 2, 4.0, 10);
        let test = gaussian_pair(500, 500, 2, 4.0, 11);
        let (head, history) = train_head(build_head(2, 7).unwrap(), &train, &HeadTrainConfig::default()).unwrap();
        assert_eq!(history.len(), 1);
        let scores = score(&head, &test).unwrap();
        let labels: Vec<bool> = test.labels.iter().map(|l| l.is_anomalous()).collect();
        assert!(roc_auc(&scores, &labels).unwrap().auc >= 0.99);
    }

    #[test]
    fn imbalanced_training_is_accepted() {
        let set = gaussian_pair(900, 100, 4, 3.0, 2);
        assert!(train_head(build_head(4, 0).unwrap(), &set, &HeadTrainConfig::default()).is_ok());
    }

    #[test]
    fn single_class_is_rejected() {
        let set = gaussian_pair(10, 0, 3, 1.0, 0);
        assert!(matches!(
            train_head(build_head(3, 0).unwrap(), &set, &HeadTrainConfig::default()),
            Err(Error::DegenerateLabels(_))
        ));
    }

    #[test]
    fn zero_epochs_is_identity() {
        let set = gaussian_pair(10, 10, 3, 1.0, 0);
        let head = build_head(3, 5).unwrap();
        let cfg = HeadTrainConfig { epochs: 0, ..Default::default() };
        assert_eq!(train_head(head.clone(), &set, &cfg).unwrap().0, head);
    }

    #[test]
    fn training_is_deterministic_under_seed() {
        let set = gaussian_pair(100, 100, 5, 2.0, 3);
        let cfg = HeadTrainConfig { seed: 42, epochs: 2, ..Default::default() };
        let a = train_head(build_head(5, 1).unwrap(), &set, &cfg).unwrap().0;
        let b = train_head(build_head(5, 1).unwrap(), &set, &cfg).unwrap().0;
        assert_eq!(a, b);
    }

    #[test]
    fn decaying_multipliers_move_lower_layer_less() {
        let set = gaussian_pair(200, 200, 6, 2.0, 4);
        let init = build_head(6, 2).unwrap();
        let cfg = HeadTrainConfig {
            lr_multipliers: Some(vec![0.1, 1.0]),
            ..Default::default()
        };
        let (trained, _) = train_head(init.clone(), &set, &cfg).unwrap();
        let moved = |i: usize| {
            let a = init.network.dense_layers().nth(i).unwrap();
            let b = trained.network.dense_layers().nth(i).unwrap();
            (&a.weights - &b.weights).iter().map(|d| d.abs()).fold(0.0, f64::max)
        };
        // a single Adam update stays within a few multiples of lr · multiplier
        let steps = (400.0f64 / 64.0).ceil();
        assert!(moved(0) <= 4e-4 * steps);
        assert!(moved(1) > moved(0));
        let multipliers: Vec<f64> = trained.network.dense_layers().map(|d| d.lr_multiplier).collect();
        assert_eq!(multipliers, vec![0.1, 1.0]);
    }

    #[test]
    fn standardization_is_stored_and_applied() {
        let mut set = gaussian_pair(100, 100, 3, 3.0, 6);
        set.vectors.mapv_inplace(|v| v * 1000.0 + 5000.0);
        let cfg = HeadTrainConfig { standardize: true, epochs: 3, ..Default::default() };
        let (head, _) = train_head(build_head(3, 0).unwrap(), &set, &cfg).unwrap();
        assert!(head.standardizer.is_some());
        let back = ClassifierHead::from_bytes(&head.to_bytes()).unwrap();
        assert_eq!(back, head);
        assert_eq!(score(&back, &set).unwrap(), score(&head, &set).unwrap());
    }

    #[test]
    fn dim_mismatch_rejected() {
        let set = gaussian_pair(5, 5, 3, 1.0, 0);
        let head = build_head(4, 0).unwrap();
        assert!(matches!(score(&head, &set), Err(Error::Shape(_))));
    }
}
