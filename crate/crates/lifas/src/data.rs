//! On-the-fly batches of spectrogram images.
//!
//! Clips are read, decoded, resampled, trimmed, turned into images and
//! grouped in manifest order (train order shuffled per epoch). DSP for the
//! clips of a batch runs on the worker pool and a producer thread keeps up
//! to `prefetch_depth` batches ready. Neither changes the emitted order or
//! contents.

use std::path::{Path, PathBuf};
use std::sync::mpsc::{sync_channel, Receiver};
use std::sync::Arc;
use std::thread::JoinHandle;

use lifas_core::audio::resample;
use lifas_core::features::clip_image;
use lifas_core::{AugmentPolicy, Manifest, Matrix, SpectrogramConfig, Split, Tensor, DEFAULT_CLIP_LEN_SAMPLES};
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fsio::read_wav;

/// How clips become network inputs.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct DataConfig {
    #[serde(flatten)]
    pub spectrogram: SpectrogramConfig,
    /// Clips are trimmed to their first `clip_len_samples` samples; shorter
    /// files are skipped.
    pub clip_len_samples: usize,
    /// Batches kept ready ahead of the consumer; 0 produces synchronously.
    pub prefetch_depth: usize,
}

impl Default for DataConfig {
    fn default() -> Self {
        Self {
            spectrogram: SpectrogramConfig::default(),
            clip_len_samples: DEFAULT_CLIP_LEN_SAMPLES,
            prefetch_depth: 4,
        }
    }
}

impl DataConfig {
    pub fn validate(&self) -> Result<()> {
        self.spectrogram.validate()?;
        if self.clip_len_samples < self.spectrogram.n_fft {
            return Err(Error::Config(format!(
                "clip_len_samples {} is shorter than n_fft {}",
                self.clip_len_samples, self.spectrogram.n_fft
            )));
        }
        Ok(())
    }

    pub fn image_dims(&self) -> (usize, usize) {
        (self.spectrogram.image_height_px, self.spectrogram.image_width_px)
    }
}

/// Worker pool used for DSP and convolutions.
#[derive(Clone)]
pub struct Exec {
    pool: Arc<rayon::ThreadPool>,
    single_threaded: bool,
}

impl Exec {
    pub fn with_threads(threads: usize) -> Result<Self> {
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(threads.max(1))
            .build()
            .map_err(|e| Error::Threads(e.to_string()))?;
        Ok(Self {
            pool: Arc::new(pool),
            single_threaded: threads <= 1,
        })
    }

    /// One worker and no producer thread.
    pub fn single_threaded() -> Result<Self> {
        Self::with_threads(1)
    }

    /// Uses `LIFAS_THREADS` when set, otherwise all cores.
    pub fn from_env(single_threaded: bool) -> Result<Self> {
        if single_threaded {
            return Self::single_threaded();
        }
        let threads = match std::env::var("LIFAS_THREADS") {
            Ok(v) => v
                .trim()
                .parse::<usize>()
                .ok()
                .filter(|&n| n > 0)
                .ok_or_else(|| Error::Config(format!("LIFAS_THREADS must be a positive integer, got {v:?}")))?,
            Err(_) => std::thread::available_parallelism().map_or(1, |n| n.get()),
        };
        Self::with_threads(threads)
    }

    pub fn is_single_threaded(&self) -> bool {
        self.single_threaded
    }

    pub fn threads(&self) -> usize {
        self.pool.current_num_threads()
    }

    pub fn install<R: Send>(&self, f: impl FnOnce() -> R + Send) -> R {
        self.pool.install(f)
    }
}

/// A group of images with their labels. `entries` are indices into the
/// manifest's entry list.
#[derive(Clone, Debug, PartialEq)]
pub struct Batch {
    pub images: Tensor<f32>,
    pub labels: Vec<usize>,
    pub entries: Vec<usize>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }
}

/// SplitMix64 finalizer, used to derive independent seeds.
pub fn mix_seed(a: u64, b: u64) -> u64 {
    let mut z = a ^ b.wrapping_add(0x9e37_79b9_7f4a_7c15).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Loads one clip at the configured rate and length.
pub fn load_clip_samples(path: &Path, data: &DataConfig) -> Result<Vec<f32>> {
    let clip = read_wav(path)?;
    let clip = resample(&clip, data.spectrogram.sample_rate_hz).map_err(|source| Error::Audio {
        path: path.to_path_buf(),
        source,
    })?;
    if clip.len() < data.clip_len_samples {
        return Err(Error::ShortClip {
            path: path.to_path_buf(),
            len: clip.len(),
            needed: data.clip_len_samples,
        });
    }
    Ok(clip.samples()[..data.clip_len_samples].to_vec())
}

#[derive(Clone)]
struct Job {
    entry: usize,
    path: PathBuf,
    label: usize,
}

struct Producer {
    jobs: Vec<Job>,
    cursor: usize,
    pending: Vec<(Job, Matrix<f32>)>,
    skipped: usize,
    batch_size: usize,
    data: DataConfig,
    augment: Option<(AugmentPolicy, u64)>,
    exec: Exec,
    failed: bool,
}

impl Producer {
    fn image(&self, job: &Job) -> Result<Matrix<f32>> {
        let samples = load_clip_samples(&job.path, &self.data)?;
        let aug = self
            .augment
            .as_ref()
            .map(|(policy, seed)| (policy, mix_seed(*seed, job.entry as u64)));
        Ok(clip_image(&samples, &self.data.spectrogram, aug)?)
    }

    fn fill(&mut self) -> Result<()> {
        while self.pending.len() < self.batch_size && self.cursor < self.jobs.len() {
            let want = self.batch_size - self.pending.len();
            let end = (self.cursor + want).min(self.jobs.len());
            let chunk = &self.jobs[self.cursor..end];
            let results: Vec<Result<Matrix<f32>>> = if self.exec.is_single_threaded() {
                chunk.iter().map(|job| self.image(job)).collect()
            } else {
                self.exec.install(|| chunk.par_iter().map(|job| self.image(job)).collect())
            };
            for (job, result) in chunk.iter().zip(results) {
                match result {
                    Ok(image) => self.pending.push((job.clone(), image)),
                    Err(e) => {
                        log::warn!("skipping clip: {e}");
                        self.skipped += 1;
                        if self.skipped * 100 > self.jobs.len() {
                            return Err(Error::SkipBudget {
                                skipped: self.skipped,
                                total: self.jobs.len(),
                            });
                        }
                    }
                }
            }
            self.cursor = end;
        }
        Ok(())
    }

    fn next_batch(&mut self) -> Option<Result<Batch>> {
        if self.failed {
            return None;
        }
        if let Err(e) = self.fill() {
            self.failed = true;
            return Some(Err(e));
        }
        if self.pending.is_empty() {
            return None;
        }
        let take = self.pending.len().min(self.batch_size);
        let items: Vec<_> = self.pending.drain(..take).collect();
        let (h, w) = self.data.image_dims();
        let mut pixels = Vec::with_capacity(items.len() * h * w);
        for (_, image) in &items {
            pixels.extend_from_slice(image.as_slice());
        }
        let images = match Tensor::from_vec(&[items.len(), 1, h, w], pixels) {
            Ok(t) => t,
            Err(e) => return Some(Err(e.into())),
        };
        Some(Ok(Batch {
            images,
            labels: items.iter().map(|(j, _)| j.label).collect(),
            entries: items.iter().map(|(j, _)| j.entry).collect(),
        }))
    }
}

enum Source {
    Inline(Box<Producer>),
    Prefetch {
        rx: Receiver<Result<Batch>>,
        handle: Option<JoinHandle<()>>,
    },
}

/// Ordered stream of batches for one pass over a split.
pub struct BatchStream {
    source: Source,
    n_entries: usize,
}

impl BatchStream {
    /// Entries the pass will attempt to load.
    pub fn n_entries(&self) -> usize {
        self.n_entries
    }
}

impl Iterator for BatchStream {
    type Item = Result<Batch>;

    fn next(&mut self) -> Option<Self::Item> {
        match &mut self.source {
            Source::Inline(p) => p.next_batch(),
            Source::Prefetch { rx, handle } => match rx.recv() {
                Ok(item) => Some(item),
                Err(_) => {
                    if let Some(h) = handle.take() {
                        if h.join().is_err() {
                            return Some(Err(Error::Threads("batch producer panicked".into())));
                        }
                    }
                    None
                }
            },
        }
    }
}

impl Drop for BatchStream {
    fn drop(&mut self) {
        if let Source::Prefetch { rx, handle } = &mut self.source {
            // unblock the producer before joining it
            while rx.try_recv().is_ok() {}
            let (_, dummy) = sync_channel(0);
            drop(std::mem::replace(rx, dummy));
            if let Some(h) = handle.take() {
                let _ = h.join();
            }
        }
    }
}

/// Number of batches a split of `n` entries yields when nothing is skipped.
pub fn batches_per_epoch(n: usize, batch_size: usize) -> usize {
    n.div_ceil(batch_size)
}

/// Batches over `split` of `manifest`. Train order is shuffled by
/// `epoch_seed`; val keeps manifest order. Augmentation, when given, is
/// applied to every clip with a seed derived from `epoch_seed` and the
/// clip's manifest index.
pub fn batches(
    manifest: &Manifest,
    split: Split,
    data: &DataConfig,
    augment: Option<&AugmentPolicy>,
    batch_size: usize,
    epoch_seed: u64,
    exec: &Exec,
) -> Result<BatchStream> {
    if batch_size == 0 {
        return Err(Error::Config("batch_size must be positive".into()));
    }
    data.validate()?;
    let mut jobs = Vec::new();
    for (i, e) in manifest.entries.iter().enumerate() {
        if e.split != Some(split) {
            continue;
        }
        let label = manifest
            .label_index(&e.language)
            .ok_or_else(|| lifas_core::manifest::ManifestError::UnknownLabel(e.language.clone()))?;
        jobs.push(Job {
            entry: i,
            path: PathBuf::from(&e.path),
            label,
        });
    }
    if split == Split::Train {
        jobs.shuffle(&mut ChaCha8Rng::seed_from_u64(epoch_seed));
    }
    let n_entries = jobs.len();
    let mut producer = Producer {
        jobs,
        cursor: 0,
        pending: Vec::new(),
        skipped: 0,
        batch_size,
        data: data.clone(),
        augment: augment.filter(|p| p.is_active()).map(|p| (p.clone(), epoch_seed)),
        exec: exec.clone(),
        failed: false,
    };
    let source = if exec.is_single_threaded() || data.prefetch_depth == 0 {
        Source::Inline(Box::new(producer))
    } else {
        let (tx, rx) = sync_channel(data.prefetch_depth);
        let handle = std::thread::Builder::new()
            .name("lifas-batches".into())
            .spawn(move || {
                while let Some(item) = producer.next_batch() {
                    if tx.send(item).is_err() {
                        break;
                    }
                }
            })
            .map_err(|e| Error::Threads(e.to_string()))?;
        Source::Prefetch {
            rx,
            handle: Some(handle),
        }
    };
    Ok(BatchStream { source, n_entries })
}
