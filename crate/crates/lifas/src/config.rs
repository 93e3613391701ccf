//! Run configuration: one flat JSON object whose keys mirror the CLI flags.

use std::fs;
use std::path::Path;

use lifas_core::{AugmentPolicy, ModelSpec, OneCycleSchedule, TrainConfig};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::data::DataConfig;
use crate::error::{Error, Result};
use crate::train::FitOptions;

/// Architecture knobs; the input size and classes come from the data.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ModelArch {
    pub stem_channels: usize,
    pub stem_stride: usize,
    pub stem_pool: bool,
    pub stage_channels: Vec<usize>,
    pub blocks_per_stage: Vec<usize>,
}

impl Default for ModelArch {
    fn default() -> Self {
        let d = ModelSpec::default();
        Self {
            stem_channels: d.stem_channels,
            stem_stride: d.stem_stride,
            stem_pool: d.stem_pool,
            stage_channels: d.stage_channels,
            blocks_per_stage: d.blocks_per_stage,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    #[serde(flatten)]
    pub train: TrainConfig,
    #[serde(flatten)]
    pub schedule: OneCycleSchedule,
    #[serde(flatten)]
    pub augment: AugmentPolicy,
    #[serde(flatten)]
    pub data: DataConfig,
    #[serde(flatten)]
    pub model: ModelArch,
    /// Re-estimate batch-norm statistics after every epoch.
    pub recalibrate_bn: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            train: TrainConfig::default(),
            schedule: OneCycleSchedule::default(),
            augment: AugmentPolicy::default(),
            data: DataConfig::default(),
            model: ModelArch::default(),
            recalibrate_bn: true,
        }
    }
}

impl RunConfig {
    /// Reads `path` (if any) and applies `overrides` on top; override keys
    /// win. Unknown keys are rejected.
    pub fn load(path: Option<&Path>, overrides: Map<String, Value>) -> Result<Self> {
        let mut merged = match path {
            Some(p) => {
                let text = fs::read_to_string(p).map_err(|e| Error::io(p, e))?;
                match serde_json::from_str::<Value>(&text).map_err(|e| Error::json(p, e))? {
                    Value::Object(m) => m,
                    _ => return Err(Error::Config(format!("{}: expected a JSON object", p.display()))),
                }
            }
            None => Map::new(),
        };
        merged.extend(overrides);
        Self::from_map(merged)
    }

    pub fn from_map(map: Map<String, Value>) -> Result<Self> {
        let known = match serde_json::to_value(RunConfig::default()) {
            Ok(Value::Object(m)) => m,
            _ => unreachable!("RunConfig serializes to an object"),
        };
        if let Some(k) = map.keys().find(|k| !known.contains_key(*k)) {
            return Err(Error::Config(format!("unknown configuration key {k:?}")));
        }
        let cfg: RunConfig =
            serde_json::from_value(Value::Object(map)).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn validate(&self) -> Result<()> {
        if self.train.epochs == 0 || self.train.batch_size == 0 {
            return Err(Error::Config("epochs and batch_size must be positive".into()));
        }
        if !(self.train.momentum >= 0.0 && self.train.momentum < 1.0) {
            return Err(Error::Config(format!("momentum must be in [0, 1), got {}", self.train.momentum)));
        }
        if self.train.weight_decay.is_nan() || self.train.weight_decay < 0.0 {
            return Err(Error::Config("weight_decay must be non-negative".into()));
        }
        // total_steps is derived from the data; check the rest with a stand-in
        self.schedule.with_total_steps(2).validate()?;
        self.data.validate()?;
        let n_frames = self.data.spectrogram.n_frames(self.data.clip_len_samples);
        self.augment
            .validate_for(self.data.spectrogram.n_mels, n_frames)
            .map_err(|e| Error::Config(e.to_string()))?;
        Ok(())
    }

    pub fn model_spec(&self, labels: &[String]) -> Result<ModelSpec> {
        let (h, w) = self.data.image_dims();
        let spec = ModelSpec {
            stem_channels: self.model.stem_channels,
            stem_stride: self.model.stem_stride,
            stem_pool: self.model.stem_pool,
            stage_channels: self.model.stage_channels.clone(),
            blocks_per_stage: self.model.blocks_per_stage.clone(),
            ..ModelSpec::for_labels(labels, h, w)
        };
        spec.validate()?;
        Ok(spec)
    }

    pub fn fit_options(&self, out_dir: Option<&Path>) -> FitOptions {
        FitOptions {
            data: self.data.clone(),
            train: self.train.clone(),
            schedule: self.schedule.clone(),
            augment: self.augment.is_active().then(|| self.augment.clone()),
            out_dir: out_dir.map(Path::to_path_buf),
            validate: true,
            recalibrate_bn: self.recalibrate_bn,
        }
    }
}
