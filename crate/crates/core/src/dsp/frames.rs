use ndarray::Array2;

use super::spectrogram::Spectrogram;
use crate::error::{Error, Result};

/// Stacked context windows `[n_windows × (n_mels · context)]`.
///
/// Window `i` concatenates frames `i..i + context`, each frame contributing
/// its `n_mels` values in order.
#[derive(Debug, Clone, PartialEq)]
pub struct WindowBatch {
    pub data: Array2<f32>,
    pub n_mels: usize,
    pub context: usize,
}

impl WindowBatch {
    pub fn n_windows(&self) -> usize {
        self.data.nrows()
    }

    pub fn width(&self) -> usize {
        self.data.ncols()
    }
}

pub fn frame_windows(spec: &Spectrogram, context: usize) -> Result<WindowBatch> {
    if context == 0 {
        return Err(Error::Config("context must be at least 1 frame".into()));
    }
    let n_frames = spec.n_frames();
    if n_frames < context {
        return Err(Error::InsufficientFrames {
            needed: context,
            available: n_frames,
        });
    }
    let n_mels = spec.n_mels();
    let n_windows = n_frames - context + 1;
    let data = Array2::from_shape_fn((n_windows, n_mels * context), |(i, j)| {
        let (offset, mel) = (j / n_mels, j % n_mels);
        spec.data[[mel, i + offset]]
    });
    Ok(WindowBatch {
        data,
        n_mels,
        context,
    })
}

#[cfg(test)]
mod tests {
    use super::super::mel::MelConfig;
    use super::super::stft::StftConfig;
    use super::*;
    use ndarray::array;

    fn spec_from(data: Array2<f32>) -> Spectrogram {
        Spectrogram {
            mel_config: MelConfig::new(data.nrows()),
            data,
            stft_config: StftConfig::new(1024, 512).unwrap(),
            sample_rate_hz: 16000,
        }
    }

    #[test]
    fn hand_enumerated_single_mel() {
        let spec = spec_from(array![[1.0, 2.0, 3.0]]);
        let w = frame_windows(&spec, 2).unwrap();
        assert_eq!(w.data, array![[1.0, 2.0], [2.0, 3.0]]);
    }

    #[test]
    fn frame_major_layout() {
        let spec = spec_from(array![[1.0, 2.0, 3.0], [10.0, 20.0, 30.0]]);
        let w = frame_windows(&spec, 2).unwrap();
        assert_eq!(w.data, array![[1.0, 10.0, 2.0, 20.0], [2.0, 20.0, 3.0, 30.0]]);
    }

    #[test]
    fn context_one_is_identity_framing() {
        let spec = spec_from(Array2::from_shape_fn((4, 6), |(m, t)| (m * 10 + t) as f32));
        let w = frame_windows(&spec, 1).unwrap();
        assert_eq!(w.n_windows(), 6);
        assert_eq!(w.data, spec.data.t());
    }

    #[test]
    fn paper_scale_shape() {
        let spec = spec_from(Array2::zeros((64, 313)));
        let w = frame_windows(&spec, 5).unwrap();
        assert_eq!(w.data.dim(), (309, 320));
    }

    #[test]
    fn too_few_frames() {
        let spec = spec_from(Array2::zeros((4, 3)));
        assert!(matches!(
            frame_windows(&spec, 5),
            Err(Error::InsufficientFrames { needed: 5, available: 3 })
        ));
        assert!(frame_windows(&spec, 0).is_err());
    }

    #[test]
    fn first_window_starts_with_first_frame() {
        let spec = spec_from(Array2::from_shape_fn((8, 12), |(m, t)| (m as f32).sin() + t as f32));
        let w = frame_windows(&spec, 5).unwrap();
        let first: Vec<f32> = w.data.row(0).iter().take(8).copied().collect();
        let frame0: Vec<f32> = spec.data.column(0).to_vec();
        assert_eq!(first, frame0);
    }
}
