use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;

use super::{mel_filterbank, DspError, FftPlan, SpectrogramConfig};
use crate::matrix::Matrix;

/// Power floor applied before taking logarithms.
pub const DB_AMIN: f64 = 1e-10;

/// Mel spectrogram in dB, `n_mels` rows (lowest band first) by `n_frames`
/// columns.
#[derive(Clone, Debug, PartialEq)]
pub struct Spectrogram {
    pub values: Matrix<f64>,
    pub config: SpectrogramConfig,
}

impl Spectrogram {
    pub fn n_mels(&self) -> usize {
        self.values.rows()
    }

    pub fn n_frames(&self) -> usize {
        self.values.cols()
    }

    pub fn min_max(&self) -> (f64, f64) {
        self.values
            .as_slice()
            .iter()
            .fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &v| (lo.min(v), hi.max(v)))
    }

    pub fn mean(&self) -> f64 {
        let data = self.values.as_slice();
        data.iter().sum::<f64>() / data.len() as f64
    }
}

/// Symmetric Hann window `0.5·(1 − cos(2πn/(N−1)))`.
pub fn hann_window(n: usize) -> Vec<f64> {
    if n == 1 {
        return alloc::vec![1.0];
    }
    let denom = (n - 1) as f64;
    (0..n)
        .map(|i| 0.5 * (1.0 - libm::cos(2.0 * PI * i as f64 / denom)))
        .collect()
}

/// Hann-windowed short-time Fourier transform without center padding.
///
/// Returns an `(n_fft/2 + 1) × n_frames` matrix; frame `t` starts at sample
/// `t · hop_samples`.
pub fn stft(samples: &[f32], config: &SpectrogramConfig) -> Result<Matrix<Complex64>, DspError> {
    config.validate()?;
    let n_fft = config.n_fft;
    if samples.len() < n_fft {
        return Err(DspError::TooShort {
            len: samples.len(),
            n_fft,
        });
    }
    let n_frames = config.n_frames(samples.len());
    let n_bins = config.n_bins();
    let plan = FftPlan::new(n_fft)?;
    let window = hann_window(n_fft);
    let mut out = Matrix::filled(n_bins, n_frames, Complex64::new(0.0, 0.0));
    let mut buf = alloc::vec![Complex64::new(0.0, 0.0); n_fft];
    for t in 0..n_frames {
        let frame = &samples[t * config.hop_samples..t * config.hop_samples + n_fft];
        for ((b, &s), &w) in buf.iter_mut().zip(frame).zip(&window) {
            *b = Complex64::new(s as f64 * w, 0.0);
        }
        plan.forward(&mut buf);
        for (k, v) in buf.iter().take(n_bins).enumerate() {
            out.set(k, t, *v);
        }
    }
    Ok(out)
}

/// `10·log10(max(S, ε) / ref)` with `ref` the largest floored cell, then
/// clamped from below at `max − top_db`.
pub fn power_to_db(power: &Matrix<f64>, top_db: f64) -> Matrix<f64> {
    let reference = power
        .as_slice()
        .iter()
        .fold(DB_AMIN, |acc, &v| acc.max(v));
    let db = power.map(|v| 10.0 * libm::log10(v.max(DB_AMIN) / reference));
    let peak = db.as_slice().iter().fold(f64::NEG_INFINITY, |a, &v| a.max(v));
    let floor = peak - top_db;
    db.map(|v| v.max(floor))
}

/// `power_to_db(filterbank · |STFT|^power_exponent)`.
pub fn melspectrogram(samples: &[f32], config: &SpectrogramConfig) -> Result<Spectrogram, DspError> {
    let spectrum = stft(samples, config)?;
    let bank = mel_filterbank(config)?;
    let n_frames = spectrum.cols();
    let n_bins = spectrum.rows();
    let magnitude_power = if config.power_exponent == 2.0 {
        spectrum.map(|v| v.norm_sqr())
    } else {
        let p = config.power_exponent;
        spectrum.map(|v| libm::pow(v.norm(), p))
    };
    let mut mel = Matrix::filled(config.n_mels, n_frames, 0.0);
    for m in 0..config.n_mels {
        let weights = bank.weights.row(m);
        let (lo, hi) = bank.support(m);
        for t in 0..n_frames {
            let mut acc = 0.0;
            let hi = hi.min(n_bins);
            for (k, &w) in weights.iter().enumerate().take(hi).skip(lo) {
                acc += w * magnitude_power.get(k, t);
            }
            mel.set(m, t, acc);
        }
    }
    Ok(Spectrogram {
        values: power_to_db(&mel, config.top_db),
        config: config.clone(),
    })
}
