use std::io;
use std::path::{Path, PathBuf};

use lifas_core::audio::AudioError;
use lifas_core::dsp::DspError;
use lifas_core::features::FeatureError;
use lifas_core::manifest::ManifestError;
use lifas_core::metrics::EvalError;
use lifas_core::nn::NnError;
use lifas_core::schedule::ScheduleError;
use lifas_core::synth::SynthError;
use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{}: {source}", path.display())]
    Io { path: PathBuf, source: io::Error },
    #[error("{}: {source}", path.display())]
    Audio { path: PathBuf, source: AudioError },
    #[error("{}: {source}", path.display())]
    Csv { path: PathBuf, source: csv::Error },
    #[error("{}: {source}", path.display())]
    Json { path: PathBuf, source: serde_json::Error },
    #[error("{}: {message}", path.display())]
    Checkpoint { path: PathBuf, message: String },
    #[error("{}: clip has {len} samples, need at least {needed}", path.display())]
    ShortClip { path: PathBuf, len: usize, needed: usize },
    #[error("invalid configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Manifest(#[from] ManifestError),
    #[error(transparent)]
    Dsp(#[from] DspError),
    #[error(transparent)]
    Features(#[from] FeatureError),
    #[error(transparent)]
    Synth(#[from] SynthError),
    #[error(transparent)]
    Nn(#[from] NnError),
    #[error(transparent)]
    Schedule(#[from] ScheduleError),
    #[error(transparent)]
    Eval(#[from] EvalError),
    #[error("{skipped} of {total} clips could not be loaded, more than the 1% budget")]
    SkipBudget { skipped: usize, total: usize },
    #[error("non-finite {what} at step {step} (epoch {epoch})")]
    NonFinite { what: &'static str, step: usize, epoch: usize },
    #[error("thread pool: {0}")]
    Threads(String),
}

impl Error {
    pub fn io(path: impl AsRef<Path>, source: io::Error) -> Self {
        Error::Io { path: path.as_ref().to_path_buf(), source }
    }

    pub fn json(path: impl AsRef<Path>, source: serde_json::Error) -> Self {
        Error::Json { path: path.as_ref().to_path_buf(), source }
    }

    pub fn csv(path: impl AsRef<Path>, source: csv::Error) -> Self {
        Error::Csv { path: path.as_ref().to_path_buf(), source }
    }

    /// 2 for bad input or usage, 1 for internal failures.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Io { source, .. } if source.kind() == io::ErrorKind::NotFound => 2,
            Error::Io { .. } => 1,
            Error::Audio { .. }
            | Error::Csv { .. }
            | Error::Json { .. }
            | Error::Checkpoint { .. }
            | Error::ShortClip { .. }
            | Error::Config(_)
            | Error::Manifest(_)
            | Error::Dsp(_)
            | Error::Synth(_)
            | Error::SkipBudget { .. } => 2,
            Error::Features(_)
            | Error::Nn(_)
            | Error::Schedule(_)
            | Error::Eval(_)
            | Error::NonFinite { .. }
            | Error::Threads(_) => 1,
        }
    }
}
