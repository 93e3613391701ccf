//! Labeled, speaker-attributed clip lists and speaker-disjoint splitting.

use alloc::collections::{BTreeMap, BTreeSet};
use alloc::string::{String, ToString};
use alloc::vec::Vec;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ManifestError {
    #[error("language {language}: {needed} clips requested, {available} available")]
    InsufficientClips {
        language: String,
        needed: usize,
        available: usize,
    },
    #[error("language {language}: not enough distinct speakers to keep train and val speaker-disjoint")]
    InsufficientSpeakers { language: String },
    #[error("speaker {0} appears in both train and val")]
    SpeakerOverlap(String),
    #[error("language {0} is not in the label set")]
    UnknownLabel(String),
    #[error("unknown split {0:?}")]
    UnknownSplit(String),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Split {
    Train,
    Val,
}

impl Split {
    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Val => "val",
        }
    }
}

impl core::str::FromStr for Split {
    type Err = ManifestError;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "train" => Ok(Split::Train),
            "val" => Ok(Split::Val),
            other => Err(ManifestError::UnknownSplit(other.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub path: String,
    pub language: String,
    pub speaker_id: String,
    /// `None` until the manifest has been split.
    pub split: Option<Split>,
}

/// Speaker id encoded in a corpus session directory name: everything
/// before the first `-` (`anon123-20090101-abc` → `anon123`).
pub fn speaker_from_session(session_dir: &str) -> &str {
    session_dir.split('-').next().unwrap_or(session_dir)
}

/// Clip list plus the ordered label set; a language's label index is its
/// position in `labels`.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Manifest {
    pub entries: Vec<ManifestEntry>,
    labels: Vec<String>,
}

impl Manifest {
    /// Labels are the distinct languages in sorted order.
    pub fn new(entries: Vec<ManifestEntry>) -> Self {
        let labels: BTreeSet<String> = entries.iter().map(|e| e.language.clone()).collect();
        Self {
            entries,
            labels: labels.into_iter().collect(),
        }
    }

    pub fn with_labels(entries: Vec<ManifestEntry>, labels: Vec<String>) -> Result<Self, ManifestError> {
        if let Some(e) = entries.iter().find(|e| !labels.contains(&e.language)) {
            return Err(ManifestError::UnknownLabel(e.language.clone()));
        }
        Ok(Self { entries, labels })
    }

    pub fn labels(&self) -> &[String] {
        &self.labels
    }

    pub fn label_index(&self, language: &str) -> Option<usize> {
        self.labels.iter().position(|l| l == language)
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn entries_in(&self, split: Split) -> impl Iterator<Item = &ManifestEntry> {
        self.entries.iter().filter(move |e| e.split == Some(split))
    }

    pub fn count(&self, split: Split, language: &str) -> usize {
        self.entries_in(split).filter(|e| e.language == language).count()
    }

    /// Fails if any speaker has clips in both splits.
    pub fn check_speaker_disjoint(&self) -> Result<(), ManifestError> {
        let train: BTreeSet<&str> = self.entries_in(Split::Train).map(|e| e.speaker_id.as_str()).collect();
        match self.entries_in(Split::Val).find(|e| train.contains(e.speaker_id.as_str())) {
            Some(e) => Err(ManifestError::SpeakerOverlap(e.speaker_id.clone())),
            None => Ok(()),
        }
    }
}

/// Speaker-grouped split with exact per-language counts.
///
/// Languages are processed in label order. Within a language, speakers are
/// shuffled by `seed` and whole speakers go to val until `val_per_lang`
/// clips are reached; the last speaker is truncated to fit and any leftover
/// clips of that speaker are dropped. Remaining speakers fill train up to
/// `train_per_lang`. A speaker placed on one side by an earlier language
/// stays on that side. Entries not selected are omitted from the result.
pub fn split(
    manifest: &Manifest,
    train_per_lang: usize,
    val_per_lang: usize,
    seed: u64,
) -> Result<Manifest, ManifestError> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut side: BTreeMap<String, Split> = BTreeMap::new();
    let mut train_out = Vec::new();
    let mut val_out = Vec::new();

    for language in manifest.labels() {
        let mut by_speaker: BTreeMap<&str, Vec<&ManifestEntry>> = BTreeMap::new();
        for e in manifest.entries.iter().filter(|e| &e.language == language) {
            by_speaker.entry(e.speaker_id.as_str()).or_default().push(e);
        }
        for clips in by_speaker.values_mut() {
            clips.sort_by(|a, b| a.path.cmp(&b.path));
        }
        let available: usize = by_speaker.values().map(Vec::len).sum();
        if available < train_per_lang + val_per_lang {
            return Err(ManifestError::InsufficientClips {
                language: language.clone(),
                needed: train_per_lang + val_per_lang,
                available,
            });
        }
        let mut speakers: Vec<&str> = by_speaker.keys().copied().collect();
        speakers.shuffle(&mut rng);
        // committed val speakers are used for val first
        speakers.sort_by_key(|s| match side.get(*s) {
            Some(Split::Val) => 0,
            None => 1,
            Some(Split::Train) => 2,
        });

        let mut val_taken = 0;
        let mut used_for_val = BTreeSet::new();
        for &speaker in &speakers {
            if val_taken >= val_per_lang {
                break;
            }
            if side.get(speaker) == Some(&Split::Train) {
                continue;
            }
            let clips = &by_speaker[speaker];
            let take = clips.len().min(val_per_lang - val_taken);
            for e in &clips[..take] {
                val_out.push(ManifestEntry {
                    split: Some(Split::Val),
                    ..(*e).clone()
                });
            }
            val_taken += take;
            used_for_val.insert(speaker);
        }

        let mut train_taken = 0;
        let mut used_for_train = BTreeSet::new();
        for &speaker in &speakers {
            if train_taken >= train_per_lang {
                break;
            }
            if used_for_val.contains(speaker) || side.get(speaker) == Some(&Split::Val) {
                continue;
            }
            let clips = &by_speaker[speaker];
            let take = clips.len().min(train_per_lang - train_taken);
            for e in &clips[..take] {
                train_out.push(ManifestEntry {
                    split: Some(Split::Train),
                    ..(*e).clone()
                });
            }
            train_taken += take;
            used_for_train.insert(speaker);
        }

        if val_taken < val_per_lang || train_taken < train_per_lang {
            return Err(ManifestError::InsufficientSpeakers {
                language: language.clone(),
            });
        }
        for s in used_for_val {
            side.insert(s.to_string(), Split::Val);
        }
        for s in used_for_train {
            side.insert(s.to_string(), Split::Train);
        }
    }

    train_out.extend(val_out);
    let out = Manifest::with_labels(train_out, manifest.labels.clone())?;
    out.check_speaker_disjoint()?;
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use alloc::format;

    fn corpus(languages: &[&str], speakers: usize, clips: usize) -> Manifest {
        let mut entries = Vec::new();
        for lang in languages {
            for s in 0..speakers {
                for c in 0..clips {
                    entries.push(ManifestEntry {
                        path: format!("{lang}/{lang}{s}-2009-x/{c}.wav"),
                        language: lang.to_string(),
                        speaker_id: format!("{lang}{s}"),
                        split: None,
                    });
                }
            }
        }
        Manifest::new(entries)
    }

    #[test]
    fn session_rule() {
        assert_eq!(speaker_from_session("anon123-20090101-abc"), "anon123");
        assert_eq!(speaker_from_session("solo"), "solo");
    }

    #[test]
    fn labels_are_sorted_and_indexed() {
        let m = corpus(&["russian", "english"], 1, 1);
        assert_eq!(m.labels(), &["english", "russian"]);
        assert_eq!(m.label_index("russian"), Some(1));
        assert_eq!(m.label_index("klingon"), None);
    }

    #[test]
    fn single_speaker_cannot_be_split() {
        let m = corpus(&["english"], 1, 10);
        assert_eq!(
            split(&m, 5, 5, 0),
            Err(ManifestError::InsufficientSpeakers { language: "english".into() })
        );
    }

    #[test]
    fn too_few_clips() {
        let m = corpus(&["english"], 3, 2);
        assert!(matches!(split(&m, 5, 2, 0), Err(ManifestError::InsufficientClips { needed: 7, available: 6, .. })));
    }

    #[test]
    fn exact_counts_and_disjoint() {
        let m = corpus(&["english", "russian"], 10, 10);
        for seed in 0..20 {
            let out = split(&m, 60, 20, seed).unwrap();
            for lang in ["english", "russian"] {
                assert_eq!(out.count(Split::Train, lang), 60);
                assert_eq!(out.count(Split::Val, lang), 20);
            }
            out.check_speaker_disjoint().unwrap();
            assert_eq!(out, split(&m, 60, 20, seed).unwrap());
        }
    }

    #[test]
    fn truncates_last_val_speaker() {
        let m = corpus(&["english"], 4, 10);
        let out = split(&m, 20, 15, 3).unwrap();
        assert_eq!(out.count(Split::Val, "english"), 15);
        assert_eq!(out.count(Split::Train, "english"), 20);
        out.check_speaker_disjoint().unwrap();
    }

    #[test]
    fn shared_speaker_stays_on_one_side() {
        // speaker "poly" records in both languages
        let mut m = corpus(&["english", "french"], 3, 4);
        for e in &mut m.entries {
            if e.speaker_id.ends_with('0') {
                e.speaker_id = "poly".into();
            }
        }
        for seed in 0..30 {
            if let Ok(out) = split(&m, 4, 4, seed) {
                out.check_speaker_disjoint().unwrap();
            }
        }
    }
}
