//! Log-mel feature extraction.
//!
//! Three preprocessing profiles are provided:
//!
//! | profile | n_fft | hop | window | center | mels | frames (10 s @ 16 kHz) |
//! |---------|-------|-----|--------|--------|------|------------------------|
//! | `ae`    | 1024  | 512 | 1024   | yes    | 64   | 313                    |
//! | `cnn`   | 1024  | 128 | 1024   | yes    | 128  | 1251                   |
//! | `ast`   | 512   | 160 | 400    | no     | 128  | 1000 (padded/truncated)|
//!
//! The `ast` profile approximates a 25 ms / 10 ms filterbank front end and
//! fits the time axis to exactly 1000 frames.

mod frames;
mod mel;
mod spectrogram;
mod stft;

use std::fmt;
use std::str::FromStr;

pub use frames::{frame_windows, WindowBatch};
pub use mel::{mel_filterbank, MelConfig, MelFilter, MelFilterbank, MelNorm, MelScale};
pub use spectrogram::{log_mel, normalize, Spectrogram, SpectrogramNorm, AMIN, DB_FLOOR};
pub use stft::{power_spectrogram, stft, StftConfig};

use crate::error::{Error, Result};

pub const DEFAULT_SAMPLE_RATE: u32 = 16_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Profile {
    Ae,
    Cnn,
    Ast,
}

impl fmt::Display for Profile {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Profile::Ae => "ae",
            Profile::Cnn => "cnn",
            Profile::Ast => "ast",
        })
    }
}

impl FromStr for Profile {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ae" => Ok(Profile::Ae),
            "cnn" => Ok(Profile::Cnn),
            "ast" => Ok(Profile::Ast),
            other => Err(Error::Config(format!("unknown profile `{other}`"))),
        }
    }
}

/// Everything needed to turn a mono signal into a spectrogram.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FeatureConfig {
    pub sample_rate_hz: u32,
    pub stft: StftConfig,
    pub mel: MelConfig,
    /// Pad or truncate the time axis to this many frames.
    pub target_frames: Option<usize>,
    pub norm: SpectrogramNorm,
    /// Frames per sliding window for the autoencoder path.
    pub context: usize,
}

impl FeatureConfig {
    pub fn for_profile(profile: Profile) -> Self {
        match profile {
            Profile::Ae => Self {
                sample_rate_hz: DEFAULT_SAMPLE_RATE,
                stft: StftConfig {
                    n_fft: 1024,
                    hop_length: 512,
                    win_length: 1024,
                    center: true,
                },
                mel: MelConfig::new(64),
                target_frames: None,
                norm: SpectrogramNorm::None,
                context: 5,
            },
            Profile::Cnn => Self {
                sample_rate_hz: DEFAULT_SAMPLE_RATE,
                stft: StftConfig {
                    n_fft: 1024,
                    hop_length: 128,
                    win_length: 1024,
                    center: true,
                },
                mel: MelConfig::new(128),
                target_frames: None,
                norm: SpectrogramNorm::MinMax,
                context: 1,
            },
            Profile::Ast => Self {
                sample_rate_hz: DEFAULT_SAMPLE_RATE,
                stft: StftConfig {
                    n_fft: 512,
                    hop_length: 160,
                    win_length: 400,
                    center: false,
                },
                mel: MelConfig::new(128),
                target_frames: Some(1000),
                norm: SpectrogramNorm::None,
                context: 1,
            },
        }
    }

    pub fn validate(&self) -> Result<()> {
        self.stft.validate()?;
        self.mel.validate(self.sample_rate_hz)?;
        if self.context == 0 {
            return Err(Error::Config("context must be at least 1".into()));
        }
        Ok(())
    }

    pub fn filterbank(&self) -> Result<MelFilterbank> {
        mel_filterbank(self.sample_rate_hz, self.stft.n_fft, &self.mel)
    }
}

/// Builds spectrograms for one configuration, reusing the filterbank.
#[derive(Debug, Clone)]
pub struct FeatureExtractor {
    config: FeatureConfig,
    filterbank: MelFilterbank,
}

impl FeatureExtractor {
    pub fn new(config: FeatureConfig) -> Result<Self> {
        config.validate()?;
        let filterbank = config.filterbank()?;
        Ok(Self { config, filterbank })
    }

    pub fn config(&self) -> &FeatureConfig {
        &self.config
    }

    /// Mono signal to (normalized, frame-fitted) log-mel spectrogram.
    pub fn spectrogram(&self, signal: &[f64]) -> Result<Spectrogram> {
        let spectrum = stft(signal, &self.config.stft)?;
        let power = power_spectrogram(&spectrum);
        let mut spec = log_mel(&power, &self.filterbank, &self.config.stft)?;
        if let Some(frames) = self.config.target_frames {
            spec = spec.fit_frames(frames);
        }
        Ok(normalize(&spec, self.config.norm))
    }

    pub fn windows(&self, signal: &[f64]) -> Result<WindowBatch> {
        frame_windows(&self.spectrogram(signal)?, self.config.context)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn ten_second_tone() -> Vec<f64> {
        (0..160_000)
            .map(|i| 0.3 * (2.0 * std::f64::consts::PI * 440.0 * i as f64 / 16000.0).sin())
            .collect()
    }

    #[test]
    fn profile_shapes_for_ten_seconds() {
        let signal = ten_second_tone();
        let ae = FeatureExtractor::new(FeatureConfig::for_profile(Profile::Ae)).unwrap();
        assert_eq!(ae.spectrogram(&signal).unwrap().data.dim(), (64, 313));
        assert_eq!(ae.windows(&signal).unwrap().data.dim(), (309, 320));
        let cnn = FeatureExtractor::new(FeatureConfig::for_profile(Profile::Cnn)).unwrap();
        assert_eq!(cnn.spectrogram(&signal).unwrap().data.dim(), (128, 1251));
        let ast = FeatureExtractor::new(FeatureConfig::for_profile(Profile::Ast)).unwrap();
        assert_eq!(ast.spectrogram(&signal).unwrap().data.dim(), (128, 1000));
    }

    #[test]
    fn profile_names_parse() {
        for p in [Profile::Ae, Profile::Cnn, Profile::Ast] {
            assert_eq!(p.to_string().parse::<Profile>().unwrap(), p);
        }
        assert!("vit".parse::<Profile>().is_err());
    }
}
