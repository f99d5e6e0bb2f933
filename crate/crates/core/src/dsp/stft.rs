use ndarray::Array2;
use rustfft::num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};

/// Short-time Fourier transform parameters. The window is always a
/// periodic Hann window of `win_length` samples, zero-padded to `n_fft`
/// and centered in the frame.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StftConfig {
    pub n_fft: usize,
    pub hop_length: usize,
    pub win_length: usize,
    /// Reflect-pad the signal by `n_fft / 2` on both sides.
    pub center: bool,
}

impl StftConfig {
    pub fn new(n_fft: usize, hop_length: usize) -> Result<Self> {
        let cfg = Self {
            n_fft,
            hop_length,
            win_length: n_fft,
            center: true,
        };
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_fft == 0 || !self.n_fft.is_power_of_two() {
            return Err(Error::Config(format!(
                "n_fft must be a power of two, got {}",
                self.n_fft
            )));
        }
        if self.hop_length == 0 || self.hop_length > self.n_fft {
            return Err(Error::Config(format!(
                "hop_length must lie in 1..={}, got {}",
                self.n_fft, self.hop_length
            )));
        }
        if self.win_length == 0 || self.win_length > self.n_fft {
            return Err(Error::Config(format!(
                "win_length must lie in 1..={}, got {}",
                self.n_fft, self.win_length
            )));
        }
        Ok(())
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }

    /// Number of frames produced for a signal of `len` samples, or `None`
    /// when an uncentered transform has less than one full frame.
    pub fn n_frames(&self, len: usize) -> Option<usize> {
        if len == 0 {
            return None;
        }
        if self.center {
            Some(1 + len / self.hop_length)
        } else if len >= self.n_fft {
            Some(1 + (len - self.n_fft) / self.hop_length)
        } else {
            None
        }
    }

    /// The analysis window, `n_fft` samples long.
    pub fn window(&self) -> Vec<f64> {
        let mut w = vec![0.0; self.n_fft];
        let offset = (self.n_fft - self.win_length) / 2;
        let m = self.win_length as f64;
        for n in 0..self.win_length {
            w[offset + n] = 0.5 - 0.5 * (2.0 * std::f64::consts::PI * n as f64 / m).cos();
        }
        w
    }
}

/// Maps a (possibly out-of-range) index onto `0..len` by mirror reflection
/// without repeating the edge sample.
fn reflect_index(idx: isize, len: usize) -> usize {
    if len == 1 {
        return 0;
    }
    let period = 2 * (len as isize - 1);
    let m = idx.rem_euclid(period);
    if m >= len as isize {
        (period - m) as usize
    } else {
        m as usize
    }
}

/// Complex spectrum `[(n_fft/2 + 1) × n_frames]`; column `t` is the FFT of
/// the windowed frame starting at `t · hop` in the (padded) signal.
pub fn stft(signal: &[f64], cfg: &StftConfig) -> Result<Array2<Complex64>> {
    cfg.validate()?;
    if signal.is_empty() {
        return Err(Error::Domain("cannot transform an empty signal".into()));
    }
    let n_frames = cfg.n_frames(signal.len()).ok_or_else(|| {
        Error::Domain(format!(
            "signal of {} samples is shorter than one {}-sample frame",
            signal.len(),
            cfg.n_fft
        ))
    })?;
    let pad = if cfg.center { (cfg.n_fft / 2) as isize } else { 0 };
    let window = cfg.window();
    let fft = FftPlanner::<f64>::new().plan_fft_forward(cfg.n_fft);
    let n_bins = cfg.n_bins();

    let mut out = Array2::<Complex64>::zeros((n_bins, n_frames));
    let mut frame = vec![Complex64::new(0.0, 0.0); cfg.n_fft];
    for t in 0..n_frames {
        let start = (t * cfg.hop_length) as isize - pad;
        for (n, slot) in frame.iter_mut().enumerate() {
            let idx = start + n as isize;
            let x = if idx >= 0 && (idx as usize) < signal.len() {
                signal[idx as usize]
            } else {
                signal[reflect_index(idx, signal.len())]
            };
            *slot = Complex64::new(x * window[n], 0.0);
        }
        fft.process(&mut frame);
        for k in 0..n_bins {
            out[[k, t]] = frame[k];
        }
    }
    Ok(out)
}

pub fn power_spectrogram(spectrum: &Array2<Complex64>) -> Array2<f64> {
    spectrum.mapv(|z| z.norm_sqr())
}
