//! Synthetic classification corpora: each class is band-limited noise with
//! a class-specific sinusoidal amplitude modulation.

use alloc::format;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::PI;

use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::dsp::FftPlan;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SynthError {
    #[error("invalid synthetic task: {0}")]
    Invalid(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticClass {
    pub name: String,
    /// Passband `[lo, hi]` in Hz.
    pub band_hz: [f64; 2],
    pub am_rate_hz: f64,
}

fn default_clip_len() -> usize {
    crate::DEFAULT_CLIP_LEN_SAMPLES
}
fn default_rate() -> u32 {
    crate::DEFAULT_SAMPLE_RATE_HZ
}
fn default_clips_per_speaker() -> usize {
    10
}
fn default_depth() -> f64 {
    0.8
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SyntheticTaskSpec {
    pub n_classes: usize,
    pub train_per_class: usize,
    pub val_per_class: usize,
    pub classes: Vec<SyntheticClass>,
    pub seed: u64,
    #[serde(default = "default_clip_len")]
    pub clip_len_samples: usize,
    #[serde(default = "default_rate")]
    pub sample_rate_hz: u32,
    #[serde(default = "default_clips_per_speaker")]
    pub clips_per_speaker: usize,
    /// Modulation depth in `[0, 1)`.
    #[serde(default = "default_depth")]
    pub am_depth: f64,
}

/// One clip of the corpus and where it goes.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct SynthItem {
    pub class_index: usize,
    pub clip_index: usize,
    pub speaker_id: String,
    /// `<class>/<speaker>-<date>-synth/clipNNNN.wav`
    pub relative_path: String,
}

impl SyntheticTaskSpec {
    fn with_classes(classes: Vec<SyntheticClass>, train_per_class: usize, val_per_class: usize, seed: u64) -> Self {
        Self {
            n_classes: classes.len(),
            train_per_class,
            val_per_class,
            classes,
            seed,
            clip_len_samples: default_clip_len(),
            sample_rate_hz: default_rate(),
            clips_per_speaker: default_clips_per_speaker(),
            am_depth: default_depth(),
        }
    }

    /// Low band 200–1000 Hz at 3 Hz AM versus high band 2000–4000 Hz at 7 Hz.
    pub fn two_class(train_per_class: usize, val_per_class: usize, seed: u64) -> Self {
        let class = |name: &str, lo, hi, am| SyntheticClass {
            name: name.into(),
            band_hz: [lo, hi],
            am_rate_hz: am,
        };
        Self::with_classes(
            alloc::vec![class("low", 200.0, 1000.0, 3.0), class("high", 2000.0, 4000.0, 7.0)],
            train_per_class,
            val_per_class,
            seed,
        )
    }

    /// Six disjoint bands spanning 150–7600 Hz, each with its own AM rate.
    pub fn six_class(train_per_class: usize, val_per_class: usize, seed: u64) -> Self {
        let bands = [
            ("band1", 150.0, 450.0, 2.0),
            ("band2", 600.0, 1100.0, 3.5),
            ("band3", 1300.0, 2000.0, 5.0),
            ("band4", 2300.0, 3300.0, 6.5),
            ("band5", 3700.0, 5000.0, 8.0),
            ("band6", 5500.0, 7600.0, 9.5),
        ];
        let classes = bands
            .iter()
            .map(|&(name, lo, hi, am)| SyntheticClass {
                name: name.into(),
                band_hz: [lo, hi],
                am_rate_hz: am,
            })
            .collect();
        Self::with_classes(classes, train_per_class, val_per_class, seed)
    }

    pub fn clips_per_class(&self) -> usize {
        self.train_per_class + self.val_per_class
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |msg: String| Err(SynthError::Invalid(msg));
        if self.n_classes != self.classes.len() || self.n_classes == 0 {
            return fail(format!("n_classes = {} but {} classes defined", self.n_classes, self.classes.len()));
        }
        if self.sample_rate_hz == 0 || self.clip_len_samples == 0 || self.clips_per_speaker == 0 {
            return fail("sample rate, clip length and clips_per_speaker must be positive".into());
        }
        if !(0.0..1.0).contains(&self.am_depth) {
            return fail("am_depth must be in [0, 1)".into());
        }
        let nyquist = self.sample_rate_hz as f64 / 2.0;
        for c in &self.classes {
            let [lo, hi] = c.band_hz;
            if !(lo > 0.0 && lo < hi && hi < nyquist) {
                return fail(format!("class {}: band must satisfy 0 < lo < hi < {nyquist}", c.name));
            }
            if !(c.am_rate_hz >= 0.0) {
                return fail(format!("class {}: AM rate must be nonnegative", c.name));
            }
            if c.name.is_empty() || c.name.contains(['-', '/', '\\', ',']) || c.name.starts_with('.') {
                return fail(format!("class name {:?} is not a plain directory name", c.name));
            }
        }
        for (i, a) in self.classes.iter().enumerate() {
            for b in &self.classes[i + 1..] {
                if a.name == b.name {
                    return fail(format!("duplicate class name {}", a.name));
                }
                if a.band_hz == b.band_hz && a.am_rate_hz == b.am_rate_hz {
                    return fail(format!("classes {} and {} are identical", a.name, b.name));
                }
            }
        }
        Ok(())
    }

    /// Every clip of the corpus in class-major order. Consecutive runs of
    /// `clips_per_speaker` clips share a speaker session.
    pub fn layout(&self) -> Vec<SynthItem> {
        let mut items = Vec::with_capacity(self.n_classes * self.clips_per_class());
        for (ci, class) in self.classes.iter().enumerate() {
            for clip in 0..self.clips_per_class() {
                let speaker = format!("{}{:03}", class.name, clip / self.clips_per_speaker);
                items.push(SynthItem {
                    class_index: ci,
                    clip_index: clip,
                    relative_path: format!("{}/{speaker}-20260101-synth/clip{clip:04}.wav", class.name),
                    speaker_id: speaker,
                });
            }
        }
        items
    }

    /// Samples of one clip, deterministic in `(seed, class_index, clip_index)`.
    ///
    /// White Gaussian noise is amplitude-modulated by
    /// `1 + depth·sin(2π·rate·t + φ)`, masked to the class band in the
    /// frequency domain, truncated to the clip length and peak-normalized to
    /// a random level in `[0.3, 0.9]`.
    pub fn clip_samples(&self, class_index: usize, clip_index: usize) -> Vec<f32> {
        let class = &self.classes[class_index];
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        rng.set_stream(((class_index as u64) << 32) | clip_index as u64);
        let n = self.clip_len_samples.next_power_of_two();
        let sr = self.sample_rate_hz as f64;
        let phase = rng.random_range(0.0..2.0 * PI);
        let peak = rng.random_range(0.3..0.9);
        let omega = 2.0 * PI * class.am_rate_hz / sr;
        let mut buf: Vec<Complex64> = (0..n)
            .map(|t| {
                let noise: f64 = rng.sample(StandardNormal);
                let env = 1.0 + self.am_depth * libm::sin(omega * t as f64 + phase);
                Complex64::new(noise * env, 0.0)
            })
            .collect();
        let plan = FftPlan::new(n).expect("power of two");
        plan.forward(&mut buf);
        let [lo, hi] = class.band_hz;
        for (k, v) in buf.iter_mut().enumerate() {
            let freq = k.min(n - k) as f64 * sr / n as f64;
            if freq < lo || freq > hi {
                *v = Complex64::new(0.0, 0.0);
            }
        }
        plan.inverse(&mut buf);
        let signal: Vec<f64> = buf[..self.clip_len_samples].iter().map(|c| c.re).collect();
        let max = signal.iter().fold(0.0f64, |a, v| a.max(v.abs()));
        let scale = if max > 0.0 { peak / max } else { 0.0 };
        signal.iter().map(|v| (v * scale) as f32).collect()
    }
}
