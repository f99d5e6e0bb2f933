//! Pipeline configuration: TOML file, then command-line overrides, then
//! `--strict-paper`.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use faultsound::dsp::Profile;
use faultsound::formats::Metadata;
use faultsound::lof::DEFAULT_CONTAMINATION;
use faultsound::Error;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub store_root: PathBuf,
    pub strict_paper: bool,
    pub features: FeaturesSection,
    pub split: SplitSection,
    pub autoencoder: AutoencoderSection,
    pub head: HeadSection,
    pub lof: LofSection,
    pub tsne: TsneSection,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        Self {
            store_root: PathBuf::from("store"),
            strict_paper: false,
            features: FeaturesSection::default(),
            split: SplitSection::default(),
            autoencoder: AutoencoderSection::default(),
            head: HeadSection::default(),
            lof: LofSection::default(),
            tsne: TsneSection::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    /// `ae`, `cnn` or `ast`.
    pub profile: String,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        Self { profile: "ae".into() }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct SplitSection {
    pub seed: u64,
    /// `supervised` or `unsupervised`.
    pub mode: String,
    pub stratified: bool,
}

impl Default for SplitSection {
    fn default() -> Self {
        Self {
            seed: 0,
            mode: "unsupervised".into(),
            stratified: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AutoencoderSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub standardize: bool,
}

impl Default for AutoencoderSection {
    fn default() -> Self {
        Self {
            epochs: 50,
            batch_size: 512,
            learning_rate: 1e-3,
            seed: 0,
            standardize: true,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct HeadSection {
    pub epochs: usize,
    pub batch_size: usize,
    pub learning_rate: f64,
    pub seed: u64,
    pub standardize: bool,
    /// Per-layer learning-rate decay factor; unset trains every layer at
    /// the base rate.
    pub lr_decay: Option<f64>,
}

impl Default for HeadSection {
    fn default() -> Self {
        Self {
            epochs: 1,
            batch_size: 64,
            learning_rate: 1e-3,
            seed: 0,
            standardize: false,
            lr_decay: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct LofSection {
    pub n_neighbors: usize,
    pub p: f64,
    pub contamination: Vec<f64>,
}

impl Default for LofSection {
    fn default() -> Self {
        Self {
            n_neighbors: 4,
            p: 2.0,
            contamination: DEFAULT_CONTAMINATION.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneSection {
    pub perplexity: f64,
    pub iterations: usize,
    pub learning_rate: f64,
    pub seed: u64,
}

impl Default for TsneSection {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iterations: 1000,
            learning_rate: 200.0,
            seed: 0,
        }
    }
}

impl PipelineConfig {
    pub fn load(path: Option<&Path>) -> Result<Self, Error> {
        let Some(path) = path else {
            return Ok(Self::default());
        };
        let text = std::fs::read_to_string(path)?;
        toml::from_str(&text).map_err(|e| Error::Config(format!("{}: {}", path.display(), e.message())))
    }

    /// Turns off every default that departs from the baseline recipe.
    pub fn apply_strict_paper(&mut self) {
        self.strict_paper = true;
        self.autoencoder.standardize = false;
        self.split.stratified = false;
        self.head.standardize = false;
    }

    pub fn profile(&self) -> Result<Profile, Error> {
        self.features.profile.parse()
    }

    /// Flattened `section.key=value` view for run records.
    pub fn snapshot(&self) -> Metadata {
        let value = serde_json::to_value(self).expect("config serializes");
        let mut out = Metadata::new();
        flatten("", &value, &mut out);
        out
    }
}

fn flatten(prefix: &str, value: &serde_json::Value, out: &mut Metadata) {
    match value {
        serde_json::Value::Object(map) => {
            for (k, v) in map {
                let key = if prefix.is_empty() { k.clone() } else { format!("{prefix}.{k}") };
                flatten(&key, v, out);
            }
        }
        serde_json::Value::Array(items) => {
            let joined: Vec<String> = items.iter().map(|v| v.to_string()).collect();
            out.insert(prefix.to_string(), joined.join(","));
        }
        serde_json::Value::String(s) => {
            out.insert(prefix.to_string(), s.clone());
        }
        other => {
            out.insert(prefix.to_string(), other.to_string());
        }
    }
}
