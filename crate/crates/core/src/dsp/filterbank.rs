use alloc::vec::Vec;

use super::{hz_to_mel, mel_to_hz, DspError, SpectrogramConfig};
use crate::matrix::Matrix;

/// Triangular mel filters, `n_mels × (n_fft/2 + 1)`, each row peaking at
/// exactly 1.0.
#[derive(Clone, Debug, PartialEq)]
pub struct MelFilterbank {
    pub weights: Matrix<f64>,
    /// The `n_mels + 2` filter breakpoints in Hz, equally spaced in mel.
    pub breakpoints_hz: Vec<f64>,
    supports: Vec<(usize, usize)>,
}

impl MelFilterbank {
    pub fn n_mels(&self) -> usize {
        self.weights.rows()
    }

    /// Half-open bin range `[lo, hi)` holding the nonzero weights of `row`.
    pub fn support(&self, row: usize) -> (usize, usize) {
        self.supports[row]
    }

    /// Frequency (Hz) at which each filter's continuous triangle peaks.
    pub fn center_frequencies_hz(&self) -> &[f64] {
        &self.breakpoints_hz[1..self.breakpoints_hz.len() - 1]
    }

    /// Column of the largest weight in each row (first on ties).
    pub fn peak_bins(&self) -> Vec<usize> {
        (0..self.n_mels())
            .map(|m| {
                let row = self.weights.row(m);
                let mut best = 0;
                for (k, &w) in row.iter().enumerate() {
                    if w > row[best] {
                        best = k;
                    }
                }
                best
            })
            .collect()
    }
}

/// Builds `n_mels` triangular filters whose `n_mels + 2` breakpoints are
/// equally spaced in mel between `fmin_hz` and `fmax_hz`.
///
/// Filter `i` rises linearly from breakpoint `i` to `i + 1` and falls to
/// `i + 2`, evaluated at fractional FFT-bin positions `f · n_fft / sr`. Each
/// row is then rescaled so its largest sampled weight is 1.0.
pub fn mel_filterbank(config: &SpectrogramConfig) -> Result<MelFilterbank, DspError> {
    config.validate()?;
    let n_bins = config.n_bins();
    let mel_lo = hz_to_mel(config.fmin_hz)?;
    let mel_hi = hz_to_mel(config.fmax_hz)?;
    let n_points = config.n_mels + 2;
    let step = (mel_hi - mel_lo) / (n_points - 1) as f64;
    let breakpoints_hz = (0..n_points)
        .map(|i| {
            let mel = if i == n_points - 1 { mel_hi } else { mel_lo + step * i as f64 };
            mel_to_hz(mel)
        })
        .collect::<Result<Vec<_>, _>>()?;
    let bin_per_hz = config.n_fft as f64 / config.sample_rate_hz as f64;
    let pos: Vec<f64> = breakpoints_hz.iter().map(|f| f * bin_per_hz).collect();

    let mut weights = Matrix::filled(config.n_mels, n_bins, 0.0);
    let mut supports = Vec::with_capacity(config.n_mels);
    for m in 0..config.n_mels {
        let (left, center, right) = (pos[m], pos[m + 1], pos[m + 2]);
        let mut lo = n_bins;
        let mut hi = 0;
        for k in 0..n_bins {
            let x = k as f64;
            let rise = (x - left) / (center - left);
            let fall = (right - x) / (right - center);
            let w = rise.min(fall).max(0.0);
            if w > 0.0 {
                weights.set(m, k, w);
                lo = lo.min(k);
                hi = k + 1;
            }
        }
        if hi == 0 {
            // filter narrower than one bin: take the nearest bin to the peak
            let k = (libm::round(center) as usize).min(n_bins - 1);
            weights.set(m, k, 1.0);
            lo = k;
            hi = k + 1;
        }
        let peak = weights.row(m).iter().fold(0.0f64, |a, &b| a.max(b));
        for w in weights.row_mut(m) {
            *w /= peak;
        }
        supports.push((lo, hi));
    }
    Ok(MelFilterbank {
        weights,
        breakpoints_hz,
        supports,
    })
}
