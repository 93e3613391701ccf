//! Mel spectrogram generation: FFT, STFT framing, mel filterbank, dB
//! conversion and image rendering.

mod fft;
mod filterbank;
mod image;
mod mel;
mod stft;

use serde::{Deserialize, Serialize};
use thiserror::Error;

pub use fft::{fft, ifft, FftPlan};
pub use filterbank::{mel_filterbank, MelFilterbank};
pub use image::{bilinear_resize, render_image};
pub use mel::{hz_to_mel, mel_to_hz};
pub use stft::{hann_window, melspectrogram, power_to_db, stft, Spectrogram, DB_AMIN};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum DspError {
    #[error("FFT length {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("input has {len} samples, fewer than one {n_fft}-sample frame")]
    TooShort { len: usize, n_fft: usize },
    #[error("frequency {0} must be nonnegative")]
    NegativeFrequency(f64),
    #[error("invalid spectrogram config: {0}")]
    InvalidConfig(&'static str),
}

/// Parameters of the spectrogram and image pipeline.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SpectrogramConfig {
    pub sample_rate_hz: u32,
    pub n_fft: usize,
    pub hop_samples: usize,
    pub n_mels: usize,
    pub fmin_hz: f64,
    pub fmax_hz: f64,
    pub power_exponent: f64,
    pub top_db: f64,
    pub image_width_px: usize,
    pub image_height_px: usize,
}

impl Default for SpectrogramConfig {
    fn default() -> Self {
        Self {
            sample_rate_hz: 16_000,
            n_fft: 1024,
            hop_samples: 512,
            n_mels: 40,
            fmin_hz: 20.0,
            fmax_hz: 8000.0,
            power_exponent: 2.0,
            top_db: 80.0,
            image_width_px: 432,
            image_height_px: 288,
        }
    }
}

impl SpectrogramConfig {
    pub fn validate(&self) -> Result<(), DspError> {
        use DspError::InvalidConfig;
        if self.sample_rate_hz == 0 {
            return Err(InvalidConfig("sample_rate_hz must be positive"));
        }
        if !self.n_fft.is_power_of_two() || self.n_fft < 2 {
            return Err(DspError::NotPowerOfTwo(self.n_fft));
        }
        if self.hop_samples == 0 || self.hop_samples > self.n_fft {
            return Err(InvalidConfig("hop_samples must be in (0, n_fft]"));
        }
        if self.n_mels < 2 {
            return Err(InvalidConfig("n_mels must be at least 2"));
        }
        if !(self.fmin_hz >= 0.0 && self.fmin_hz < self.fmax_hz) {
            return Err(InvalidConfig("need 0 <= fmin_hz < fmax_hz"));
        }
        if self.fmax_hz > self.sample_rate_hz as f64 / 2.0 {
            return Err(InvalidConfig("fmax_hz exceeds the Nyquist frequency"));
        }
        if !(self.power_exponent > 0.0) || !(self.top_db > 0.0) {
            return Err(InvalidConfig("power_exponent and top_db must be positive"));
        }
        if self.image_width_px == 0 || self.image_height_px == 0 {
            return Err(InvalidConfig("image dimensions must be positive"));
        }
        Ok(())
    }

    /// Number of STFT frames produced for `len` samples (no center padding).
    pub fn n_frames(&self, len: usize) -> usize {
        if len < self.n_fft {
            0
        } else {
            1 + (len - self.n_fft) / self.hop_samples
        }
    }

    pub fn n_bins(&self) -> usize {
        self.n_fft / 2 + 1
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn default_config_is_valid() {
        let cfg = SpectrogramConfig::default();
        cfg.validate().unwrap();
        assert_eq!(cfg.n_frames(60_000), 116);
        assert_eq!(cfg.n_frames(1023), 0);
        assert_eq!(cfg.n_bins(), 513);
    }

    #[test]
    fn rejects_bad_configs() {
        let base = SpectrogramConfig::default();
        let cases = [
            SpectrogramConfig { n_fft: 1000, ..base.clone() },
            SpectrogramConfig { hop_samples: 0, ..base.clone() },
            SpectrogramConfig { hop_samples: 2048, ..base.clone() },
            SpectrogramConfig { n_mels: 1, ..base.clone() },
            SpectrogramConfig { fmin_hz: 9000.0, ..base.clone() },
            SpectrogramConfig { fmax_hz: 8000.5, ..base.clone() },
            SpectrogramConfig { fmin_hz: -1.0, ..base.clone() },
        ];
        for cfg in cases {
            assert!(cfg.validate().is_err(), "{cfg:?}");
        }
    }
}
