//! Training, evaluation and tooling for mel-spectrogram language
//! identification, built on [`lifas_core`].
//!
//! This crate owns everything that touches the filesystem or threads: WAV
//! and manifest files, the batch pipeline, the training loop, checkpoints,
//! metric exports and synthetic corpora. The `lifas` binary wraps it.

pub mod checkpoint;
pub mod config;
pub mod data;
pub mod error;
pub mod evaluate;
pub mod export;
pub mod fsio;
pub mod manifest_io;
pub mod synth_io;
pub mod train;

pub use config::RunConfig;
pub use data::{DataConfig, Exec};
pub use error::{Error, Result};
pub use evaluate::Evaluation;
pub use train::{fit, FitOptions, TrainHistory};
