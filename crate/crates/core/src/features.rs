//! Raw samples to network input: mel spectrogram, optional masking, image.

use thiserror::Error;

use crate::augment::{augment, AugmentError, AugmentPolicy};
use crate::dsp::{melspectrogram, render_image, DspError, SpectrogramConfig};
use crate::matrix::Matrix;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum FeatureError {
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Augment(#[from] AugmentError),
}

/// Renders one clip to a `[0, 1]` image of the configured size. When
/// `augment_with` is set, masks drawn from its seed are applied to the dB
/// spectrogram before rendering.
pub fn clip_image(
    samples: &[f32],
    config: &SpectrogramConfig,
    augment_with: Option<(&AugmentPolicy, u64)>,
) -> Result<Matrix<f32>, FeatureError> {
    let mut spec = melspectrogram(samples, config)?;
    if let Some((policy, seed)) = augment_with {
        if policy.is_active() {
            spec = augment(&spec, policy, seed)?;
        }
    }
    Ok(render_image(&spec, config))
}
