//! One-cycle learning-rate policy and momentum SGD.

use alloc::collections::BTreeMap;
use alloc::string::String;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::nn::{Gradients, Model, Real, Tensor};

#[derive(Debug, Error, Clone, PartialEq)]
pub enum ScheduleError {
    #[error("step {step} outside schedule of {total_steps} steps")]
    StepOutOfRange { step: usize, total_steps: usize },
    #[error("invalid schedule: {0}")]
    Invalid(&'static str),
    #[error("gradient keys do not match parameters: {0}")]
    KeyMismatch(String),
}

/// Piecewise-linear one-cycle policy: `max_lr / start_div` at step 0, up to
/// `max_lr` at the peak step, down to `max_lr / final_div` at the last step.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OneCycleSchedule {
    pub max_lr: f64,
    /// Steps in the whole cycle (epochs × batches per epoch).
    pub total_steps: usize,
    pub warmup_frac: f64,
    pub start_div: f64,
    pub final_div: f64,
}

impl Default for OneCycleSchedule {
    fn default() -> Self {
        Self {
            max_lr: 1e-2,
            total_steps: 0,
            warmup_frac: 0.3,
            start_div: 25.0,
            final_div: 1e4,
        }
    }
}

impl OneCycleSchedule {
    pub fn with_total_steps(&self, total_steps: usize) -> Self {
        Self {
            total_steps,
            ..self.clone()
        }
    }

    pub fn validate(&self) -> Result<(), ScheduleError> {
        if !(self.max_lr > 0.0) || !self.max_lr.is_finite() {
            return Err(ScheduleError::Invalid("max_lr must be positive"));
        }
        if self.total_steps < 2 {
            return Err(ScheduleError::Invalid("total_steps must be at least 2"));
        }
        if !(self.warmup_frac > 0.0 && self.warmup_frac < 1.0) {
            return Err(ScheduleError::Invalid("warmup_frac must lie in (0, 1)"));
        }
        if !(self.start_div > 0.0 && self.final_div > 0.0) {
            return Err(ScheduleError::Invalid("start_div and final_div must be positive"));
        }
        Ok(())
    }

    /// `round(warmup_frac · (total_steps − 1))`.
    pub fn peak_step(&self) -> usize {
        libm::round(self.warmup_frac * (self.total_steps - 1) as f64) as usize
    }

    pub fn initial_lr(&self) -> f64 {
        self.max_lr / self.start_div
    }

    pub fn final_lr(&self) -> f64 {
        self.max_lr / self.final_div
    }

    pub fn lr_at(&self, step: usize) -> Result<f64, ScheduleError> {
        self.validate()?;
        if step >= self.total_steps {
            return Err(ScheduleError::StepOutOfRange {
                step,
                total_steps: self.total_steps,
            });
        }
        let peak = self.peak_step();
        let lr = if step == peak {
            self.max_lr
        } else if step < peak {
            let start = self.initial_lr();
            start + (self.max_lr - start) * (step as f64 / peak as f64)
        } else {
            let span = (self.total_steps - 1 - peak) as f64;
            self.max_lr + (self.final_lr() - self.max_lr) * ((step - peak) as f64 / span)
        };
        Ok(lr)
    }
}

/// Loop settings for one training run.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainConfig {
    pub epochs: usize,
    pub batch_size: usize,
    pub momentum: f64,
    pub weight_decay: f64,
    pub seed: u64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            epochs: 8,
            batch_size: 64,
            momentum: 0.9,
            weight_decay: 0.0,
            seed: 0,
        }
    }
}

/// Momentum SGD: `v ← momentum·v + g`, `p ← p − lr·v`. With nonzero weight
/// decay, `g` includes `weight_decay · p`.
#[derive(Clone, Debug)]
pub struct Sgd<T> {
    pub momentum: f64,
    pub weight_decay: f64,
    velocity: BTreeMap<String, Tensor<T>>,
}

impl<T: Real> Sgd<T> {
    pub fn new(momentum: f64, weight_decay: f64) -> Self {
        Self {
            momentum,
            weight_decay,
            velocity: BTreeMap::new(),
        }
    }

    pub fn velocity(&self, name: &str) -> Option<&Tensor<T>> {
        self.velocity.get(name)
    }

    /// Applies one update to every trainable parameter of `model`. The
    /// gradient map must hold exactly the trainable names.
    pub fn step(&mut self, model: &mut Model<T>, grads: &Gradients<T>, lr: f64) -> Result<(), ScheduleError> {
        let names = model.trainable_names();
        if names.len() != grads.len() {
            return Err(ScheduleError::KeyMismatch(alloc::format!(
                "{} gradients for {} parameters",
                grads.len(),
                names.len()
            )));
        }
        let momentum = T::from_f64_lossy(self.momentum);
        let decay = T::from_f64_lossy(self.weight_decay);
        let lr = T::from_f64_lossy(lr);
        for (name, param) in model.named_parameters_mut() {
            if name.ends_with(".running_mean") || name.ends_with(".running_var") {
                continue;
            }
            let grad = grads
                .get(&name)
                .ok_or_else(|| ScheduleError::KeyMismatch(name.clone()))?;
            if grad.dims() != param.dims() {
                return Err(ScheduleError::KeyMismatch(alloc::format!("{name} has mismatched dims")));
            }
            let v = self
                .velocity
                .entry(name)
                .or_insert_with(|| Tensor::zeros(param.dims()));
            for ((vv, &g), p) in v.data_mut().iter_mut().zip(grad.data()).zip(param.data_mut()) {
                let g = if self.weight_decay != 0.0 { g + decay * *p } else { g };
                *vv = momentum * *vv + g;
                *p -= lr * *vv;
            }
        }
        Ok(())
    }
}
