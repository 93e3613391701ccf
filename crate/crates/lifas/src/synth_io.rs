//! Writes synthetic corpora to disk in the ingestable directory layout.

use std::fs;
use std::path::Path;

use lifas_core::manifest::split;
use lifas_core::synth::SyntheticTaskSpec;
use lifas_core::{AudioClip, Manifest, ManifestEntry};
use rayon::prelude::*;

use crate::data::Exec;
use crate::error::{Error, Result};
use crate::fsio::write_wav;
use crate::manifest_io::write_manifest;

pub fn read_task_spec(path: &Path) -> Result<SyntheticTaskSpec> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let spec: SyntheticTaskSpec = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    spec.validate()?;
    Ok(spec)
}

/// Generates every clip of `spec` under `out_dir`, then writes
/// `out_dir/manifest.csv` split speaker-disjointly into
/// `train_per_class` and `val_per_class` clips per class.
pub fn write_corpus(spec: &SyntheticTaskSpec, out_dir: &Path, exec: &Exec) -> Result<Manifest> {
    spec.validate()?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    let layout = spec.layout();
    exec.install(|| {
        layout.par_iter().try_for_each(|item| {
            let samples = spec.clip_samples(item.class_index, item.clip_index);
            let clip = AudioClip::new(samples, spec.sample_rate_hz).map_err(|source| Error::Audio {
                path: out_dir.join(&item.relative_path),
                source,
            })?;
            write_wav(&out_dir.join(&item.relative_path), &clip)
        })
    })?;
    let entries = layout
        .iter()
        .map(|item| ManifestEntry {
            path: out_dir.join(&item.relative_path).display().to_string(),
            language: spec.classes[item.class_index].name.clone(),
            speaker_id: item.speaker_id.clone(),
            split: None,
        })
        .collect();
    // sorted labels, as when the manifest is read back from disk
    let all = Manifest::new(entries);
    let manifest = split(&all, spec.train_per_class, spec.val_per_class, spec.seed)?;
    write_manifest(&out_dir.join("manifest.csv"), &manifest)?;
    Ok(manifest)
}
