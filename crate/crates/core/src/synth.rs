//! Synthetic machine sounds for demos and end-to-end checks.
//!
//! A "normal" machine hums at a fundamental with decaying harmonics over
//! broadband noise. Faults either detune the fundamental or inject short
//! impulsive clicks.

use rand::Rng as _;
use rand_distr::{Distribution, Normal};

use crate::neural::{seeded, Rng};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Condition {
    Normal,
    Detuned,
    Clicks,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MachineSound {
    pub sample_rate_hz: u32,
    pub duration_secs: f64,
    pub fundamental_hz: f64,
    pub harmonics: usize,
    pub amplitude: f64,
    pub noise_std: f64,
    /// Relative per-clip jitter of the fundamental in normal operation.
    pub jitter: f64,
    /// Fundamental multiplier for detuned faults.
    pub detune_ratio: f64,
    pub clicks_per_sec: f64,
    pub click_amplitude: f64,
}

impl Default for MachineSound {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000,
            duration_secs: 10.0,
            fundamental_hz: 220.0,
            harmonics: 6,
            amplitude: 0.3,
            noise_std: 0.02,
            jitter: 0.01,
            detune_ratio: 1.3,
            clicks_per_sec: 6.0,
            click_amplitude: 0.6,
        }
    }
}

impl MachineSound {
    pub fn generate(&self, condition: Condition, seed: u64) -> Vec<f64> {
        let mut rng = seeded(seed);
        let sr = self.sample_rate_hz as f64;
        let n = (self.duration_secs * sr).round() as usize;
        let mut f0 = self.fundamental_hz * (1.0 + rng.random_range(-self.jitter..=self.jitter));
        if condition == Condition::Detuned {
            f0 *= self.detune_ratio;
        }
        let phases: Vec<f64> = (0..self.harmonics)
            .map(|_| rng.random_range(0.0..std::f64::consts::TAU))
            .collect();
        let noise = Normal::new(0.0, self.noise_std).expect("finite std");
        let mut signal: Vec<f64> = (0..n)
            .map(|i| {
                let t = i as f64 / sr;
                let tone: f64 = phases
                    .iter()
                    .enumerate()
                    .map(|(h, &ph)| {
                        let k = (h + 1) as f64;
                        (std::f64::consts::TAU * k * f0 * t + ph).sin() / k
                    })
                    .sum();
                self.amplitude * tone / 2.5 + noise.sample(&mut rng)
            })
            .collect();
        if condition == Condition::Clicks {
            add_clicks(&mut signal, sr, self.clicks_per_sec, self.click_amplitude, &mut rng);
        }
        signal
    }
}

fn add_clicks(signal: &mut [f64], sr: f64, rate: f64, amplitude: f64, rng: &mut Rng) {
    let count = ((signal.len() as f64 / sr) * rate).round().max(1.0) as usize;
    let decay = (0.002 * sr) as usize; // 2 ms bursts
    let unit = Normal::new(0.0, 1.0).expect("unit normal");
    for _ in 0..count {
        let start = rng.random_range(0..signal.len());
        for (j, s) in signal[start..].iter_mut().take(decay * 4).enumerate() {
            let env = (-(j as f64) / decay as f64).exp();
            *s += amplitude * env * unit.sample(rng);
        }
    }
}
