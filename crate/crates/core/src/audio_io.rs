//! WAV decoding and channel downmixing.
//!
//! Only 16-bit integer PCM and 32-bit float WAV files are accepted. PCM16
//! samples are normalized by 32768, so `-32768` maps to exactly `-1.0` and
//! `32767` to `32767/32768`.

use std::path::{Path, PathBuf};

use hound::{SampleFormat, WavReader, WavSpec, WavWriter};
use ndarray::{Array1, Array2};

use crate::error::{Error, Result};

pub const PCM16_SCALE: f64 = 32768.0;

/// Decoded multi-channel audio.
#[derive(Debug, Clone, PartialEq)]
pub struct AudioClip {
    /// `[channels × n_samples]`, amplitudes in `[-1, 1]`.
    pub samples: Array2<f64>,
    pub sample_rate_hz: u32,
    pub source_path: PathBuf,
}

impl AudioClip {
    pub fn new(samples: Array2<f64>, sample_rate_hz: u32) -> Result<Self> {
        if sample_rate_hz == 0 {
            return Err(Error::Config("sample rate must be positive".into()));
        }
        if samples.nrows() == 0 {
            return Err(Error::Shape("audio clip needs at least one channel".into()));
        }
        Ok(Self {
            samples,
            sample_rate_hz,
            source_path: PathBuf::new(),
        })
    }

    /// Wraps a mono signal.
    pub fn mono(signal: &[f64], sample_rate_hz: u32) -> Result<Self> {
        let samples = Array2::from_shape_vec((1, signal.len()), signal.to_vec())
            .expect("1 × n shape always matches");
        Self::new(samples, sample_rate_hz)
    }

    pub fn channels(&self) -> usize {
        self.samples.nrows()
    }

    pub fn len(&self) -> usize {
        self.samples.ncols()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn duration_secs(&self) -> f64 {
        self.len() as f64 / self.sample_rate_hz as f64
    }

    /// Rejects clips recorded at a rate other than `expected_hz`. No
    /// resampling is performed anywhere in the pipeline.
    pub fn require_rate(&self, expected_hz: u32) -> Result<()> {
        if self.sample_rate_hz != expected_hz {
            return Err(Error::SampleRateMismatch {
                expected: expected_hz,
                found: self.sample_rate_hz,
            });
        }
        Ok(())
    }
}

/// Reads a RIFF/WAVE file holding PCM16 or float32 samples.
pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioClip> {
    let path = path.as_ref();
    let mut reader = WavReader::open(path).map_err(|e| map_open_error(path, e))?;
    let spec = reader.spec();
    let channels = spec.channels as usize;
    if channels == 0 {
        return Err(Error::Format {
            path: path.to_path_buf(),
            reason: "zero channels".into(),
        });
    }
    let expected = reader.len() as usize;

    let interleaved: Vec<f64> = match (spec.sample_format, spec.bits_per_sample) {
        (SampleFormat::Int, 16) => collect_samples(path, expected, reader.samples::<i16>(), |s| {
            s as f64 / PCM16_SCALE
        })?,
        (SampleFormat::Float, 32) => {
            collect_samples(path, expected, reader.samples::<f32>(), |s| s as f64)?
        }
        (format, bits) => {
            return Err(Error::UnsupportedCodec {
                path: path.to_path_buf(),
                codec: format!("{format:?} {bits}-bit"),
            })
        }
    };

    if interleaved.len() % channels != 0 {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: interleaved.len(),
        });
    }
    let frames = interleaved.len() / channels;
    let samples = Array2::from_shape_fn((channels, frames), |(c, i)| interleaved[i * channels + c]);
    Ok(AudioClip {
        samples,
        sample_rate_hz: spec.sample_rate,
        source_path: path.to_path_buf(),
    })
}

fn collect_samples<S, I>(
    path: &Path,
    expected: usize,
    samples: I,
    convert: impl Fn(S) -> f64,
) -> Result<Vec<f64>>
where
    I: Iterator<Item = hound::Result<S>>,
{
    let mut out = Vec::with_capacity(expected);
    for sample in samples {
        match sample {
            Ok(s) => out.push(convert(s)),
            Err(hound::Error::IoError(_)) | Err(hound::Error::UnfinishedSample) => {
                return Err(Error::Truncated {
                    path: path.to_path_buf(),
                    expected,
                    found: out.len(),
                })
            }
            Err(e) => {
                return Err(Error::Format {
                    path: path.to_path_buf(),
                    reason: e.to_string(),
                })
            }
        }
    }
    if out.len() < expected {
        return Err(Error::Truncated {
            path: path.to_path_buf(),
            expected,
            found: out.len(),
        });
    }
    Ok(out)
}

fn map_open_error(path: &Path, err: hound::Error) -> Error {
    match err {
        hound::Error::Unsupported => Error::UnsupportedCodec {
            path: path.to_path_buf(),
            codec: "non-PCM format tag".into(),
        },
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::NotFound => Error::Io(e),
        hound::Error::IoError(e) if e.kind() == std::io::ErrorKind::UnexpectedEof => {
            Error::Format {
                path: path.to_path_buf(),
                reason: "file ends inside the header".into(),
            }
        }
        other => Error::Format {
            path: path.to_path_buf(),
            reason: other.to_string(),
        },
    }
}

/// Writes a clip as PCM16, clamping and rounding each sample to the
/// nearest code after scaling by 32768.
pub fn write_wav_pcm16(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let spec = WavSpec {
        channels: clip.channels() as u16,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 16,
        sample_format: SampleFormat::Int,
    };
    let mut writer = WavWriter::create(path.as_ref(), spec).map_err(hound_io)?;
    for i in 0..clip.len() {
        for c in 0..clip.channels() {
            let code = (clip.samples[[c, i]] * PCM16_SCALE)
                .round()
                .clamp(i16::MIN as f64, i16::MAX as f64) as i16;
            writer.write_sample(code).map_err(hound_io)?;
        }
    }
    writer.finalize().map_err(hound_io)?;
    Ok(())
}

/// Writes a clip as 32-bit float samples.
pub fn write_wav_f32(path: impl AsRef<Path>, clip: &AudioClip) -> Result<()> {
    let spec = WavSpec {
        channels: clip.channels() as u16,
        sample_rate: clip.sample_rate_hz,
        bits_per_sample: 32,
        sample_format: SampleFormat::Float,
    };
    let mut writer = WavWriter::create(path.as_ref(), spec).map_err(hound_io)?;
    for i in 0..clip.len() {
        for c in 0..clip.channels() {
            writer
                .write_sample(clip.samples[[c, i]] as f32)
                .map_err(hound_io)?;
        }
    }
    writer.finalize().map_err(hound_io)?;
    Ok(())
}

fn hound_io(err: hound::Error) -> Error {
    match err {
        hound::Error::IoError(e) => Error::Io(e),
        other => Error::Io(std::io::Error::other(other.to_string())),
    }
}

/// Averages all channels sample by sample.
pub fn downmix(clip: &AudioClip) -> Array1<f64> {
    clip.samples
        .mean_axis(ndarray::Axis(0))
        .unwrap_or_else(|| Array1::zeros(clip.len()))
}
