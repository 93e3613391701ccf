//! Evaluation over a manifest split and its exports.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::Path;

use lifas_core::metrics::argmax;
use lifas_core::nn::{softmax_cross_entropy, Mode};
use lifas_core::{ConfusionMatrix, Manifest, Model, Split};
use serde::Serialize;

use crate::data::{batches, DataConfig, Exec};
use crate::error::{Error, Result};
use crate::fsio::write_atomic;

#[derive(Clone, Debug, PartialEq)]
pub struct Evaluation {
    pub confusion: ConfusionMatrix,
    pub accuracy: f64,
    pub per_class: Vec<(String, Option<f64>)>,
    /// Mean cross-entropy over evaluated clips.
    pub mean_loss: f64,
}

impl Evaluation {
    pub fn n_eval(&self) -> u64 {
        self.confusion.total()
    }
}

/// Eval-mode pass over `split`, in manifest order, without augmentation.
pub fn evaluate(
    model: &Model<f32>,
    manifest: &Manifest,
    split: Split,
    data: &DataConfig,
    batch_size: usize,
    exec: &Exec,
) -> Result<Evaluation> {
    let labels = manifest.labels().to_vec();
    if model.spec().labels != labels {
        return Err(Error::Config(format!(
            "model labels {:?} differ from manifest labels {:?}",
            model.spec().labels,
            labels
        )));
    }
    let mut confusion = ConfusionMatrix::new(labels);
    let mut loss_sum = 0.0;
    for batch in batches(manifest, split, data, None, batch_size, 0, exec)? {
        let batch = batch?;
        let logits = exec.install(|| model.forward(&batch.images, Mode::Eval))?;
        let (loss, _) = softmax_cross_entropy(&logits, &batch.labels)?;
        loss_sum += loss * batch.len() as f64;
        let k = logits.dim(1);
        for (row, &actual) in logits.data().chunks_exact(k).zip(&batch.labels) {
            let scores: Vec<f64> = row.iter().map(|&v| f64::from(v)).collect();
            confusion.record(actual, argmax(&scores))?;
        }
    }
    let accuracy = confusion.accuracy()?;
    let mean_loss = loss_sum / confusion.total() as f64;
    Ok(Evaluation {
        per_class: confusion.per_class_accuracy(),
        confusion,
        accuracy,
        mean_loss,
    })
}

/// CSV with a header row of predicted labels and one row per true label.
pub fn confusion_csv(cm: &ConfusionMatrix) -> Result<Vec<u8>> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["true\\predicted".to_string()];
    header.extend(cm.labels().iter().cloned());
    w.write_record(&header).map_err(|e| Error::csv("confusion", e))?;
    for (i, label) in cm.labels().iter().enumerate() {
        let mut rec = vec![label.clone()];
        rec.extend(cm.row(i).iter().map(u64::to_string));
        w.write_record(&rec).map_err(|e| Error::csv("confusion", e))?;
    }
    w.into_inner().map_err(|e| Error::Config(format!("csv buffer: {e}")))
}

/// Aligned text rendering for terminals.
pub fn confusion_table(cm: &ConfusionMatrix) -> String {
    let corner = "true \\ pred";
    let width = cm
        .labels()
        .iter()
        .map(String::len)
        .chain(std::iter::once(corner.len()))
        .chain((0..cm.n_classes()).flat_map(|i| cm.row(i).iter().map(|c| c.to_string().len())))
        .max()
        .unwrap_or(1);
    let mut out = String::new();
    let _ = write!(out, "{corner:<width$}");
    for l in cm.labels() {
        let _ = write!(out, "  {l:>width$}");
    }
    out.push('\n');
    for (i, l) in cm.labels().iter().enumerate() {
        let _ = write!(out, "{l:<width$}");
        for c in cm.row(i) {
            let _ = write!(out, "  {c:>width$}");
        }
        out.push('\n');
    }
    out
}

#[derive(Serialize)]
struct MetricsRecord<'a> {
    accuracy: f64,
    per_class: BTreeMap<&'a str, Option<f64>>,
    n_eval: u64,
}

pub fn metrics_json(ev: &Evaluation) -> Result<Vec<u8>> {
    let record = MetricsRecord {
        accuracy: ev.accuracy,
        per_class: ev.per_class.iter().map(|(l, a)| (l.as_str(), *a)).collect(),
        n_eval: ev.n_eval(),
    };
    let mut bytes = serde_json::to_vec_pretty(&record).map_err(|e| Error::json("metrics", e))?;
    bytes.push(b'\n');
    Ok(bytes)
}

/// Writes `confusion.csv`, `confusion.txt` and `metrics.json` into `dir`.
pub fn write_evaluation(dir: &Path, ev: &Evaluation) -> Result<()> {
    write_atomic(&dir.join("confusion.csv"), &confusion_csv(&ev.confusion)?)?;
    write_atomic(&dir.join("confusion.txt"), confusion_table(&ev.confusion).as_bytes())?;
    write_atomic(&dir.join("metrics.json"), &metrics_json(ev)?)
}
