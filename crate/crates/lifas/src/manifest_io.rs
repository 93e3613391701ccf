//! Manifest CSV files and corpus ingestion.
//!
//! The CSV header is `path,language,speaker_id,split`; `split` is empty for
//! entries that have not been assigned. Relative paths are resolved against
//! the directory holding the manifest.

use std::fs;
use std::path::{Path, PathBuf};

use lifas_core::manifest::speaker_from_session;
use lifas_core::{Manifest, ManifestEntry, Split};
use serde::{Deserialize, Serialize};
use walkdir::WalkDir;

use crate::error::{Error, Result};
use crate::fsio::write_atomic;

#[derive(Debug, Serialize, Deserialize)]
struct Row {
    path: String,
    language: String,
    speaker_id: String,
    split: String,
}

fn manifest_dir(path: &Path) -> PathBuf {
    let dir = path.parent().filter(|p| !p.as_os_str().is_empty()).unwrap_or(Path::new("."));
    fs::canonicalize(dir).unwrap_or_else(|_| dir.to_path_buf())
}

/// Reads a manifest, turning every path into one usable from the current
/// directory.
pub fn read_manifest(path: &Path) -> Result<Manifest> {
    let base = manifest_dir(path);
    let mut reader = csv::Reader::from_path(path).map_err(|e| Error::csv(path, e))?;
    let mut entries = Vec::new();
    for row in reader.deserialize::<Row>() {
        let row = row.map_err(|e| Error::csv(path, e))?;
        if row.path.is_empty() {
            return Err(Error::Config(format!("{}: empty path in manifest", path.display())));
        }
        let split = match row.split.trim() {
            "" => None,
            s => Some(s.parse::<Split>()?),
        };
        let p = Path::new(&row.path);
        let resolved = if p.is_absolute() { p.to_path_buf() } else { base.join(p) };
        entries.push(ManifestEntry {
            path: resolved.display().to_string(),
            language: row.language,
            speaker_id: row.speaker_id,
            split,
        });
    }
    Ok(Manifest::new(entries))
}

/// Writes a manifest; paths inside the manifest's directory are stored
/// relative to it.
pub fn write_manifest(path: &Path, manifest: &Manifest) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let base = manifest_dir(path);
    let mut writer = csv::Writer::from_writer(Vec::new());
    for e in &manifest.entries {
        let p = Path::new(&e.path);
        let absolute = if p.is_absolute() {
            p.to_path_buf()
        } else {
            std::env::current_dir().map_err(|err| Error::io(".", err))?.join(p)
        };
        let stored = absolute
            .strip_prefix(&base)
            .map(Path::to_path_buf)
            .unwrap_or(absolute.clone());
        writer
            .serialize(Row {
                path: stored.display().to_string(),
                language: e.language.clone(),
                speaker_id: e.speaker_id.clone(),
                split: e.split.map(|s| s.as_str().to_string()).unwrap_or_default(),
            })
            .map_err(|err| Error::csv(path, err))?;
    }
    let bytes = writer
        .into_inner()
        .map_err(|e| Error::Config(format!("csv buffer: {e}")))?;
    write_atomic(path, &bytes)
}

fn sorted_children(dir: &Path) -> Result<Vec<walkdir::DirEntry>> {
    WalkDir::new(dir)
        .min_depth(1)
        .max_depth(1)
        .sort_by_file_name()
        .into_iter()
        .map(|e| e.map_err(|err| Error::io(dir, err.into())))
        .collect()
}

/// Scans `<root>/<language>/<session>/*.wav`. The speaker id is the part of
/// the session directory name before the first `-`. Entries are unsplit.
pub fn ingest(root: &Path) -> Result<Manifest> {
    let mut entries = Vec::new();
    for lang in sorted_children(root)?.into_iter().filter(|e| e.file_type().is_dir()) {
        let language = lang.file_name().to_string_lossy().into_owned();
        let before = entries.len();
        for session in sorted_children(lang.path())?.into_iter().filter(|e| e.file_type().is_dir()) {
            let session_name = session.file_name().to_string_lossy().into_owned();
            let speaker = speaker_from_session(&session_name).to_string();
            for file in sorted_children(session.path())? {
                let is_wav = file.file_type().is_file()
                    && file
                        .path()
                        .extension()
                        .is_some_and(|ext| ext.eq_ignore_ascii_case("wav"));
                if is_wav {
                    entries.push(ManifestEntry {
                        path: file.path().display().to_string(),
                        language: language.clone(),
                        speaker_id: speaker.clone(),
                        split: None,
                    });
                }
            }
        }
        if entries.len() == before {
            log::warn!("language directory {} contains no WAV files", lang.path().display());
        }
    }
    Ok(Manifest::new(entries))
}
