use ndarray::{Array2, Axis};

use super::mel::{MelConfig, MelFilterbank};
use super::stft::StftConfig;
use crate::error::{Error, Result};
use crate::formats::{kv_get, BinReader, BinWriter, Metadata};

/// Power floor applied before the dB conversion.
pub const AMIN: f64 = 1e-10;
/// `10 · log10(AMIN)`.
pub const DB_FLOOR: f32 = -100.0;

const MAGIC: &[u8; 4] = b"LMSP";
const VERSION: u8 = 1;

/// Log-mel energies in dB, `[n_mels × n_frames]`.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrogram {
    pub data: Array2<f32>,
    pub mel_config: MelConfig,
    pub stft_config: StftConfig,
    pub sample_rate_hz: u32,
}

impl Spectrogram {
    pub fn n_mels(&self) -> usize {
        self.data.nrows()
    }

    pub fn n_frames(&self) -> usize {
        self.data.ncols()
    }

    /// Pads with the dB floor or truncates along time so the result has
    /// exactly `frames` columns.
    pub fn fit_frames(&self, frames: usize) -> Spectrogram {
        let mut data = Array2::from_elem((self.n_mels(), frames), DB_FLOOR);
        let keep = frames.min(self.n_frames());
        data.slice_mut(ndarray::s![.., ..keep])
            .assign(&self.data.slice(ndarray::s![.., ..keep]));
        Spectrogram { data, ..self.clone() }
    }

    /// Per-mel mean followed by per-mel standard deviation across frames:
    /// a fixed `2 · n_mels` clip embedding.
    pub fn pooled_stats(&self) -> Vec<f64> {
        let data = self.data.mapv(f64::from);
        let mean = data.mean_axis(Axis(1)).expect("spectrogram has frames");
        let std = data.std_axis(Axis(1), 0.0);
        mean.iter().chain(std.iter()).copied().collect()
    }

    pub fn metadata(&self) -> Metadata {
        let mut m = Metadata::new();
        m.insert("rows".into(), self.n_mels().to_string());
        m.insert("cols".into(), self.n_frames().to_string());
        m.insert("sample_rate_hz".into(), self.sample_rate_hz.to_string());
        m.insert("n_fft".into(), self.stft_config.n_fft.to_string());
        m.insert("hop_length".into(), self.stft_config.hop_length.to_string());
        m.insert("win_length".into(), self.stft_config.win_length.to_string());
        m.insert("center".into(), self.stft_config.center.to_string());
        m.insert("n_mels".into(), self.mel_config.n_mels.to_string());
        m.insert("f_min".into(), self.mel_config.f_min.to_string());
        m.insert(
            "f_max".into(),
            self.mel_config.f_max_for(self.sample_rate_hz).to_string(),
        );
        m.insert("mel_scale".into(), self.mel_config.scale.to_string());
        m.insert("mel_norm".into(), self.mel_config.norm.to_string());
        m
    }

    /// Binary container: magic, version byte, rows and cols as `u32`, then
    /// row-major little-endian `f32` values.
    pub fn to_bytes(&self) -> Vec<u8> {
        let mut w = BinWriter::new();
        w.bytes(MAGIC)
            .u8(VERSION)
            .u32(self.n_mels() as u32)
            .u32(self.n_frames() as u32);
        for &v in self.data.iter() {
            w.f32(v);
        }
        w.finish()
    }

    pub fn from_bytes(bytes: &[u8], meta: &Metadata) -> Result<Self> {
        let mut r = BinReader::new(bytes);
        r.expect_magic(MAGIC)?;
        let version = r.u8()?;
        if version != VERSION {
            return Err(Error::parse(format!("unsupported spectrogram version {version}")));
        }
        let rows = r.u32()? as usize;
        let cols = r.u32()? as usize;
        let values = r.f32_vec(rows * cols)?;
        r.finish()?;
        let data = Array2::from_shape_vec((rows, cols), values)
            .map_err(|e| Error::parse(e.to_string()))?;
        let stft_config = StftConfig {
            n_fft: kv_get(meta, "n_fft")?,
            hop_length: kv_get(meta, "hop_length")?,
            win_length: kv_get(meta, "win_length")?,
            center: kv_get(meta, "center")?,
        };
        let mel_config = MelConfig {
            n_mels: kv_get(meta, "n_mels")?,
            f_min: kv_get(meta, "f_min")?,
            f_max: Some(kv_get(meta, "f_max")?),
            scale: kv_get(meta, "mel_scale")?,
            norm: kv_get(meta, "mel_norm")?,
        };
        if mel_config.n_mels != rows {
            return Err(Error::Shape(format!(
                "metadata says {} mels, container holds {rows} rows",
                mel_config.n_mels
            )));
        }
        Ok(Self {
            data,
            mel_config,
            stft_config,
            sample_rate_hz: kv_get(meta, "sample_rate_hz")?,
        })
    }
}

/// `10 · log10(max(filterbank · power, 1e-10))`, no peak referencing.
pub fn log_mel(
    power: &Array2<f64>,
    filterbank: &MelFilterbank,
    stft_config: &StftConfig,
) -> Result<Spectrogram> {
    if filterbank.weights.ncols() != power.nrows() {
        return Err(Error::Shape(format!(
            "filterbank has {} bins, power spectrum has {}",
            filterbank.weights.ncols(),
            power.nrows()
        )));
    }
    let mel_power = filterbank.weights.dot(power);
    let data = mel_power.mapv(|p| (10.0 * p.max(AMIN).log10()) as f32);
    Ok(Spectrogram {
        data,
        mel_config: filterbank.config,
        stft_config: *stft_config,
        sample_rate_hz: filterbank.sample_rate_hz,
    })
}

/// Per-clip rescaling applied after the dB conversion.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpectrogramNorm {
    None,
    /// Map the clip's range onto `[0, 1]`.
    MinMax,
    /// Zero mean, unit variance over the whole clip.
    Standardize,
}

impl std::str::FromStr for SpectrogramNorm {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(Self::None),
            "minmax" => Ok(Self::MinMax),
            "standardize" => Ok(Self::Standardize),
            other => Err(Error::Config(format!("unknown normalization `{other}`"))),
        }
    }
}

impl std::fmt::Display for SpectrogramNorm {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Self::None => "none",
            Self::MinMax => "minmax",
            Self::Standardize => "standardize",
        })
    }
}

pub fn normalize(spec: &Spectrogram, mode: SpectrogramNorm) -> Spectrogram {
    let data = match mode {
        SpectrogramNorm::None => spec.data.clone(),
        SpectrogramNorm::MinMax => {
            let lo = spec.data.iter().cloned().fold(f32::INFINITY, f32::min);
            let hi = spec.data.iter().cloned().fold(f32::NEG_INFINITY, f32::max);
            let range = hi - lo;
            if range > 0.0 {
                spec.data.mapv(|v| (v - lo) / range)
            } else {
                spec.data.mapv(|_| 0.0)
            }
        }
        SpectrogramNorm::Standardize => {
            let d = spec.data.mapv(f64::from);
            let mean = d.mean().unwrap_or(0.0);
            let std = d.std(0.0);
            if std > 0.0 {
                d.mapv(|v| ((v - mean) / std) as f32)
            } else {
                d.mapv(|_| 0.0)
            }
        }
    };
    Spectrogram { data, ..spec.clone() }
}
