//! The training loop.

use std::path::{Path, PathBuf};
use std::time::Instant;

use lifas_core::nn::BN_MOMENTUM;
use lifas_core::{AugmentPolicy, Manifest, Model, OneCycleSchedule, Sgd, Split, TrainConfig};
use serde::Serialize;

use crate::checkpoint;
use crate::data::{batches, batches_per_epoch, mix_seed, DataConfig, Exec};
use crate::error::{Error, Result};
use crate::evaluate::{evaluate, Evaluation};
use crate::fsio::write_atomic;

/// Everything `fit` needs besides the model and the data.
#[derive(Clone, Debug)]
pub struct FitOptions {
    pub data: DataConfig,
    pub train: TrainConfig,
    pub schedule: OneCycleSchedule,
    pub augment: Option<AugmentPolicy>,
    /// Where checkpoints and history files go; `None` keeps everything in
    /// memory.
    pub out_dir: Option<PathBuf>,
    /// Run validation after every epoch.
    pub validate: bool,
    /// Recompute batch-norm running statistics with the epoch's final
    /// weights before validating and checkpointing.
    pub recalibrate_bn: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct StepRecord {
    pub step: usize,
    pub lr: f64,
    pub loss: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct EpochRecord {
    pub epoch: usize,
    pub val_loss: f64,
    pub val_acc: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct TrainHistory {
    pub steps: Vec<StepRecord>,
    pub epochs: Vec<EpochRecord>,
    /// Evaluation of the final model on the val split, when run.
    pub final_eval: Option<Evaluation>,
}

impl TrainHistory {
    pub fn losses(&self) -> Vec<f64> {
        self.steps.iter().map(|s| s.loss).collect()
    }
}

fn csv_bytes<T: Serialize>(rows: &[T]) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    for r in rows {
        w.serialize(r).map_err(|e| Error::csv("history", e))?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))
}

/// Writes `steps.csv` and `epochs.csv` under `dir`.
pub fn write_history(dir: &Path, history: &TrainHistory) -> Result<()> {
    write_atomic(&dir.join("steps.csv"), &csv_bytes(&history.steps)?)?;
    write_atomic(&dir.join("epochs.csv"), &csv_bytes(&history.epochs)?)
}

/// Replaces the batch-norm running statistics with the average of batch
/// statistics over one pass of the train split, unaugmented, with the
/// current weights. Returns the number of batches used.
pub fn recalibrate_bn(
    model: &mut Model<f32>,
    manifest: &Manifest,
    data: &DataConfig,
    batch_size: usize,
    seed: u64,
    exec: &Exec,
) -> Result<usize> {
    let mut n = 0;
    for batch in batches(manifest, Split::Train, data, None, batch_size, seed, exec)? {
        let batch = batch?;
        let (_, _, stats) = exec.install(|| model.forward_train(&batch.images))?;
        // cumulative average: the first batch replaces the old values
        model.update_running_stats(&stats, 1.0 / (n + 1) as f64);
        n += 1;
    }
    Ok(n)
}

/// Trains `model` on the train split of `manifest` with a one-cycle learning
/// rate. After every epoch the val split is evaluated and, with an output
/// directory, `epoch_{k}.ckpt`, `best.ckpt` and the history CSVs are
/// written.
pub fn fit(
    mut model: Model<f32>,
    manifest: &Manifest,
    opts: &FitOptions,
    exec: &Exec,
) -> Result<(Model<f32>, TrainHistory)> {
    let cfg = &opts.train;
    if cfg.epochs == 0 || cfg.batch_size == 0 {
        return Err(Error::Config("epochs and batch_size must be positive".into()));
    }
    if model.spec().labels.as_slice() != manifest.labels() {
        return Err(Error::Config(format!(
            "model labels {:?} differ from manifest labels {:?}",
            model.spec().labels,
            manifest.labels()
        )));
    }
    if let Some(policy) = &opts.augment {
        let n_frames = opts.data.spectrogram.n_frames(opts.data.clip_len_samples);
        policy
            .validate_for(opts.data.spectrogram.n_mels, n_frames)
            .map_err(|e| Error::Config(e.to_string()))?;
    }
    let n_train = manifest.entries_in(Split::Train).count();
    if n_train == 0 {
        return Err(Error::Config("manifest has no train entries".into()));
    }
    let per_epoch = batches_per_epoch(n_train, cfg.batch_size);
    let schedule = opts.schedule.with_total_steps(cfg.epochs * per_epoch);
    schedule.validate()?;
    log::info!(
        "training on {n_train} clips, {per_epoch} batches/epoch, {} steps, {} threads",
        schedule.total_steps,
        exec.threads()
    );

    let mut sgd = Sgd::new(cfg.momentum, cfg.weight_decay);
    let mut history = TrainHistory::default();
    let mut best_acc = f64::NEG_INFINITY;
    let mut step = 0usize;
    for epoch in 0..cfg.epochs {
        let started = Instant::now();
        let epoch_seed = mix_seed(cfg.seed, epoch as u64);
        let stream = batches(
            manifest,
            Split::Train,
            &opts.data,
            opts.augment.as_ref(),
            cfg.batch_size,
            epoch_seed,
            exec,
        )?;
        for batch in stream {
            let batch = batch?;
            if step >= schedule.total_steps {
                break;
            }
            let lr = schedule.lr_at(step)?;
            let (loss, grads, stats) =
                exec.install(|| model.loss_and_gradients(&batch.images, &batch.labels))?;
            if !loss.is_finite() {
                return Err(Error::NonFinite { what: "loss", step, epoch });
            }
            sgd.step(&mut model, &grads, lr)?;
            model.update_running_stats(&stats, BN_MOMENTUM);
            if !model.is_finite() {
                return Err(Error::NonFinite { what: "parameters", step, epoch });
            }
            history.steps.push(StepRecord { step, lr, loss });
            step += 1;
        }
        if opts.recalibrate_bn {
            recalibrate_bn(&mut model, manifest, &opts.data, cfg.batch_size, epoch_seed, exec)?;
            if !model.is_finite() {
                return Err(Error::NonFinite { what: "batch-norm statistics", step, epoch });
            }
        }
        let train_loss = history.steps.iter().rev().take(per_epoch).map(|s| s.loss).sum::<f64>()
            / per_epoch.min(history.steps.len()).max(1) as f64;

        if opts.validate {
            let ev = evaluate(&model, manifest, Split::Val, &opts.data, cfg.batch_size, exec)?;
            log::info!(
                "epoch {}/{}: train loss {train_loss:.4}, val loss {:.4}, val acc {:.4} ({:.1}s)",
                epoch + 1,
                cfg.epochs,
                ev.mean_loss,
                ev.accuracy,
                started.elapsed().as_secs_f64()
            );
            history.epochs.push(EpochRecord {
                epoch,
                val_loss: ev.mean_loss,
                val_acc: ev.accuracy,
            });
            if let Some(dir) = &opts.out_dir {
                checkpoint::save(&dir.join(format!("epoch_{}.ckpt", epoch + 1)), &model)?;
                if ev.accuracy > best_acc {
                    checkpoint::save(&dir.join("best.ckpt"), &model)?;
                }
                write_history(dir, &history)?;
            }
            best_acc = best_acc.max(ev.accuracy);
            if epoch + 1 == cfg.epochs {
                history.final_eval = Some(ev);
            }
        } else {
            log::info!("epoch {}/{}: train loss {train_loss:.4}", epoch + 1, cfg.epochs);
            if let Some(dir) = &opts.out_dir {
                checkpoint::save(&dir.join(format!("epoch_{}.ckpt", epoch + 1)), &model)?;
                write_history(dir, &history)?;
            }
        }
    }
    if let Some(dir) = &opts.out_dir {
        checkpoint::save(&dir.join("final.ckpt"), &model)?;
    }
    Ok((model, history))
}
