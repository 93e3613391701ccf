use super::DspError;

/// `2595 · log10(1 + f / 700)`.
pub fn hz_to_mel(hz: f64) -> Result<f64, DspError> {
    if !(hz >= 0.0) {
        return Err(DspError::NegativeFrequency(hz));
    }
    Ok(2595.0 * libm::log10(1.0 + hz / 700.0))
}

/// `700 · (10^(m / 2595) − 1)`.
pub fn mel_to_hz(mel: f64) -> Result<f64, DspError> {
    if !(mel >= 0.0) {
        return Err(DspError::NegativeFrequency(mel));
    }
    Ok(700.0 * (libm::pow(10.0, mel / 2595.0) - 1.0))
}
