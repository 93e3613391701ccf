//! SpecAugment-style frequency and time masking.
//!
//! Time warping is not implemented.

use alloc::vec::Vec;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::Spectrogram;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum AugmentError {
    #[error("frequency mask parameter {param} exceeds {n_mels} mel rows")]
    FreqParamTooLarge { param: usize, n_mels: usize },
    #[error("time mask parameter {param} exceeds {n_frames} frames")]
    TimeParamTooLarge { param: usize, n_frames: usize },
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum MaskFill {
    /// Mean of the input spectrogram.
    #[default]
    Mean,
    /// Minimum of the input spectrogram.
    Min,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct AugmentPolicy {
    pub freq_mask_param: usize,
    pub time_mask_param: usize,
    pub n_freq_masks: usize,
    pub n_time_masks: usize,
    pub mask_fill: MaskFill,
}

impl AugmentPolicy {
    /// True when applying the policy can change a spectrogram.
    pub fn is_active(&self) -> bool {
        (self.n_freq_masks > 0 && self.freq_mask_param > 0)
            || (self.n_time_masks > 0 && self.time_mask_param > 0)
    }

    pub fn validate_for(&self, n_mels: usize, n_frames: usize) -> Result<(), AugmentError> {
        if self.freq_mask_param > n_mels {
            return Err(AugmentError::FreqParamTooLarge {
                param: self.freq_mask_param,
                n_mels,
            });
        }
        if self.time_mask_param > n_frames {
            return Err(AugmentError::TimeParamTooLarge {
                param: self.time_mask_param,
                n_frames,
            });
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Axis {
    /// Mel rows.
    Frequency,
    /// Frame columns.
    Time,
}

impl Axis {
    fn stream(self) -> u64 {
        match self {
            Axis::Frequency => 0,
            Axis::Time => 1,
        }
    }
}

/// A masked band `[start, start + width)` along one axis.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Mask {
    pub start: usize,
    pub width: usize,
}

/// Draws `n_masks` bands: width uniform in `[0, param]`, start uniform in
/// `[0, extent − width]`. Each axis uses its own ChaCha stream of `seed`.
pub fn draw_masks(axis: Axis, param: usize, n_masks: usize, extent: usize, seed: u64) -> Vec<Mask> {
    debug_assert!(param <= extent);
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(axis.stream());
    (0..n_masks)
        .map(|_| {
            let width = rng.random_range(0..=param);
            let start = rng.random_range(0..=extent - width);
            Mask { start, width }
        })
        .collect()
}

pub fn fill_value(spec: &Spectrogram, fill: MaskFill) -> f64 {
    match fill {
        MaskFill::Mean => spec.mean(),
        MaskFill::Min => spec.min_max().0,
    }
}

/// Sets the cells of `masks` along `axis` to `value`.
pub fn apply_masks(spec: &Spectrogram, axis: Axis, masks: &[Mask], value: f64) -> Spectrogram {
    let mut out = spec.clone();
    let (rows, cols) = (spec.n_mels(), spec.n_frames());
    for mask in masks {
        for i in mask.start..mask.start + mask.width {
            match axis {
                Axis::Frequency => out.values.row_mut(i).fill(value),
                Axis::Time => (0..rows).for_each(|r| out.values.set(r, i, value)),
            }
        }
    }
    debug_assert_eq!((out.n_mels(), out.n_frames()), (rows, cols));
    out
}

/// Applies `n_freq_masks` random mel-row masks.
pub fn freq_mask(spec: &Spectrogram, policy: &AugmentPolicy, seed: u64) -> Result<Spectrogram, AugmentError> {
    policy.validate_for(spec.n_mels(), usize::MAX)?;
    let masks = draw_masks(
        Axis::Frequency,
        policy.freq_mask_param,
        policy.n_freq_masks,
        spec.n_mels(),
        seed,
    );
    Ok(apply_masks(spec, Axis::Frequency, &masks, fill_value(spec, policy.mask_fill)))
}

/// Applies `n_time_masks` random frame masks.
pub fn time_mask(spec: &Spectrogram, policy: &AugmentPolicy, seed: u64) -> Result<Spectrogram, AugmentError> {
    policy.validate_for(usize::MAX, spec.n_frames())?;
    let masks = draw_masks(
        Axis::Time,
        policy.time_mask_param,
        policy.n_time_masks,
        spec.n_frames(),
        seed,
    );
    Ok(apply_masks(spec, Axis::Time, &masks, fill_value(spec, policy.mask_fill)))
}

/// Frequency masks followed by time masks. Both fill with the statistic of
/// the unmasked input.
pub fn augment(spec: &Spectrogram, policy: &AugmentPolicy, seed: u64) -> Result<Spectrogram, AugmentError> {
    policy.validate_for(spec.n_mels(), spec.n_frames())?;
    let value = fill_value(spec, policy.mask_fill);
    let freq = draw_masks(
        Axis::Frequency,
        policy.freq_mask_param,
        policy.n_freq_masks,
        spec.n_mels(),
        seed,
    );
    let time = draw_masks(
        Axis::Time,
        policy.time_mask_param,
        policy.n_time_masks,
        spec.n_frames(),
        seed,
    );
    let masked = apply_masks(spec, Axis::Frequency, &freq, value);
    Ok(apply_masks(&masked, Axis::Time, &time, value))
}
