use std::fmt;
use std::str::FromStr;

use ndarray::Array2;

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MelScale {
    /// Linear below 1 kHz, logarithmic above.
    Slaney,
    /// `2595 · log10(1 + f / 700)`.
    Htk,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MelNorm {
    /// Each filter scaled by `2 / (f_upper - f_lower)`.
    SlaneyArea,
    None,
}

const F_SP: f64 = 200.0 / 3.0;
const MIN_LOG_HZ: f64 = 1000.0;
const MIN_LOG_MEL: f64 = MIN_LOG_HZ / F_SP;

fn log_step() -> f64 {
    6.4f64.ln() / 27.0
}

impl MelScale {
    pub fn hz_to_mel(self, hz: f64) -> f64 {
        match self {
            MelScale::Htk => 2595.0 * (1.0 + hz / 700.0).log10(),
            MelScale::Slaney => {
                if hz >= MIN_LOG_HZ {
                    MIN_LOG_MEL + (hz / MIN_LOG_HZ).ln() / log_step()
                } else {
                    hz / F_SP
                }
            }
        }
    }

    pub fn mel_to_hz(self, mel: f64) -> f64 {
        match self {
            MelScale::Htk => 700.0 * (10f64.powf(mel / 2595.0) - 1.0),
            MelScale::Slaney => {
                if mel >= MIN_LOG_MEL {
                    MIN_LOG_HZ * (log_step() * (mel - MIN_LOG_MEL)).exp()
                } else {
                    F_SP * mel
                }
            }
        }
    }
}

impl fmt::Display for MelScale {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MelScale::Slaney => "slaney",
            MelScale::Htk => "htk",
        })
    }
}

impl FromStr for MelScale {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slaney" => Ok(MelScale::Slaney),
            "htk" => Ok(MelScale::Htk),
            other => Err(Error::Config(format!("unknown mel scale `{other}`"))),
        }
    }
}

impl fmt::Display for MelNorm {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            MelNorm::SlaneyArea => "slaney",
            MelNorm::None => "none",
        })
    }
}

impl FromStr for MelNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "slaney" | "slaney-area" => Ok(MelNorm::SlaneyArea),
            "none" => Ok(MelNorm::None),
            other => Err(Error::Config(format!("unknown mel normalization `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelConfig {
    pub n_mels: usize,
    pub f_min: f64,
    /// `None` means the Nyquist frequency.
    pub f_max: Option<f64>,
    pub scale: MelScale,
    pub norm: MelNorm,
}

impl MelConfig {
    pub fn new(n_mels: usize) -> Self {
        Self {
            n_mels,
            f_min: 0.0,
            f_max: None,
            scale: MelScale::Slaney,
            norm: MelNorm::SlaneyArea,
        }
    }

    pub fn f_max_for(&self, sample_rate_hz: u32) -> f64 {
        self.f_max.unwrap_or(sample_rate_hz as f64 / 2.0)
    }

    pub fn validate(&self, sample_rate_hz: u32) -> Result<()> {
        let nyquist = sample_rate_hz as f64 / 2.0;
        let f_max = self.f_max_for(sample_rate_hz);
        if self.n_mels == 0 {
            return Err(Error::Config("n_mels must be at least 1".into()));
        }
        if !(0.0 <= self.f_min && self.f_min < f_max && f_max <= nyquist) {
            return Err(Error::Config(format!(
                "need 0 <= f_min < f_max <= {nyquist}, got f_min={} f_max={f_max}",
                self.f_min
            )));
        }
        Ok(())
    }

    /// The `n_mels + 2` filter edge frequencies in Hz, equally spaced on
    /// the mel scale.
    pub fn edge_frequencies(&self, sample_rate_hz: u32) -> Vec<f64> {
        let lo = self.scale.hz_to_mel(self.f_min);
        let hi = self.scale.hz_to_mel(self.f_max_for(sample_rate_hz));
        let n = self.n_mels + 2;
        (0..n)
            .map(|i| self.scale.mel_to_hz(lo + (hi - lo) * i as f64 / (n - 1) as f64))
            .collect()
    }
}

/// A triangular mel filter in linear frequency.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MelFilter {
    pub lower_hz: f64,
    pub center_hz: f64,
    pub upper_hz: f64,
}

impl MelFilter {
    /// Un-normalized triangle height at `hz`; 1.0 at the apex.
    pub fn response(&self, hz: f64) -> f64 {
        let rising = (hz - self.lower_hz) / (self.center_hz - self.lower_hz);
        let falling = (self.upper_hz - hz) / (self.upper_hz - self.center_hz);
        rising.min(falling).max(0.0)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct MelFilterbank {
    /// `[n_mels × (n_fft/2 + 1)]`.
    pub weights: Array2<f64>,
    pub filters: Vec<MelFilter>,
    pub config: MelConfig,
    pub sample_rate_hz: u32,
    pub n_fft: usize,
}

/// Builds the triangular filterbank. Fails when some filter falls between
/// FFT bins and would have no support.
pub fn mel_filterbank(sample_rate_hz: u32, n_fft: usize, cfg: &MelConfig) -> Result<MelFilterbank> {
    cfg.validate(sample_rate_hz)?;
    if n_fft < 2 {
        return Err(Error::Config("n_fft must be at least 2".into()));
    }
    let n_bins = n_fft / 2 + 1;
    let nyquist = sample_rate_hz as f64 / 2.0;
    let bin_hz: Vec<f64> = (0..n_bins)
        .map(|k| nyquist * k as f64 / (n_bins - 1) as f64)
        .collect();
    let edges = cfg.edge_frequencies(sample_rate_hz);
    let filters: Vec<MelFilter> = edges
        .windows(3)
        .map(|w| MelFilter {
            lower_hz: w[0],
            center_hz: w[1],
            upper_hz: w[2],
        })
        .collect();

    let mut weights = Array2::zeros((cfg.n_mels, n_bins));
    for (m, filter) in filters.iter().enumerate() {
        let scale = match cfg.norm {
            MelNorm::SlaneyArea => 2.0 / (filter.upper_hz - filter.lower_hz),
            MelNorm::None => 1.0,
        };
        let mut support = false;
        for (k, &hz) in bin_hz.iter().enumerate() {
            let w = filter.response(hz);
            if w > 0.0 {
                support = true;
                weights[[m, k]] = w * scale;
            }
        }
        if !support {
            return Err(Error::Config(format!(
                "mel filter {m} ({:.1}-{:.1} Hz) covers no FFT bin; reduce n_mels or raise n_fft",
                filter.lower_hz, filter.upper_hz
            )));
        }
    }
    Ok(MelFilterbank {
        weights,
        filters,
        config: *cfg,
        sample_rate_hz,
        n_fft,
    })
}
