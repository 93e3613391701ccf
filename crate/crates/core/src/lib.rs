//! Signal processing and neural-network primitives for spoken language
//! identification from mel spectrogram images.
//!
//! The crate is `no_std` and only needs `alloc`. Everything here is a pure
//! function of its inputs: PCM16 WAV coding, resampling and clip framing,
//! FFT/STFT/mel spectrograms, SpecAugment-style masking, a residual CNN with
//! explicit backward passes, the one-cycle learning-rate policy, momentum
//! SGD, speaker-disjoint manifest splitting, and confusion-matrix metrics.
//!
//! File IO, the training loop, checkpoints and the command-line tool live in
//! the `lifas` crate.
//!
//! ## Features
//!
//! - `std`: runtime SIMD detection in the matrix-multiply kernels.
//! - `parallel`: batch-parallel convolutions through rayon. Reductions over
//!   the batch are performed in a fixed order, so results are bit-identical
//!   to the sequential path.

#![no_std]
#![forbid(unsafe_op_in_unsafe_fn)]
#![allow(clippy::neg_cmp_op_on_partial_ord, clippy::type_complexity)]

extern crate alloc;

pub mod audio;
pub mod augment;
pub mod dsp;
pub mod features;
pub mod manifest;
pub mod matrix;
pub mod metrics;
pub mod nn;
pub mod schedule;
pub mod synth;

pub use audio::{AudioClip, AudioError};
pub use augment::{AugmentError, AugmentPolicy, MaskFill};
pub use dsp::{MelFilterbank, Spectrogram, SpectrogramConfig};
pub use manifest::{Manifest, ManifestEntry, Split};
pub use matrix::Matrix;
pub use metrics::ConfusionMatrix;
pub use nn::{Model, ModelSpec, Tensor};
pub use schedule::{OneCycleSchedule, Sgd, TrainConfig};

/// Sample rate every clip is normalized to before feature extraction.
pub const DEFAULT_SAMPLE_RATE_HZ: u32 = 16_000;

/// Length of a training clip in samples (3.75 s at 16 kHz).
pub const DEFAULT_CLIP_LEN_SAMPLES: usize = 60_000;
