//! Acoustic machine-fault detection.
//!
//! WAV audio is turned into log-mel spectrograms ([`dsp`]) and scored by one
//! of three detectors: a dense autoencoder's reconstruction error
//! ([`autoencoder`]), Local Outlier Factor over clip embeddings ([`lof`]), or
//! a supervised dense head over embeddings ([`classifier_head`]). Scores are
//! evaluated with ROC/AUC ([`eval`]); [`analysis`] provides t-SNE and
//! transformer mean attention distance; [`store`] persists artifacts and
//! run records.

pub mod analysis;
pub mod audio_io;
pub mod autoencoder;
pub mod classifier_head;
pub mod dsp;
pub mod embedding;
pub mod error;
pub mod eval;
pub mod formats;
pub mod lof;
pub mod neural;
pub mod plot;
pub mod store;
pub mod synth;

pub use error::{Error, ErrorCategory, Result};
