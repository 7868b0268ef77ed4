//! Dataset directories: one record-set file per stage plus `manifest.csv`.

use std::path::{Path, PathBuf};

use gear_tda::synth::{read_recordset, RecordSet};
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.csv";

#[derive(Debug, Clone, PartialEq)]
pub struct ManifestEntry {
    /// 1-based stage number.
    pub stage: usize,
    pub life_fraction: f64,
    /// File name relative to the dataset directory.
    pub file: String,
    pub sha256: String,
}

pub fn stage_file_name(stage: usize) -> String {
    format!("stage_{stage:02}.tda")
}

pub fn sha256_hex(bytes: &[u8]) -> String {
    Sha256::digest(bytes)
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

pub fn file_sha256(path: &Path) -> CliResult<String> {
    let bytes = std::fs::read(path).map_err(|e| CliError::io(path, e))?;
    Ok(sha256_hex(&bytes))
}

pub fn write_manifest(dir: &Path, entries: &[ManifestEntry]) -> CliResult<PathBuf> {
    let path = dir.join(MANIFEST);
    let mut w = csv::Writer::from_path(&path).map_err(|e| CliError::csv(&path, e))?;
    let rows = std::iter::once(["stage", "life_fraction", "file", "sha256"].map(String::from))
        .chain(entries.iter().map(|e| {
            [
                e.stage.to_string(),
                e.life_fraction.to_string(),
                e.file.clone(),
                e.sha256.clone(),
            ]
        }));
    for row in rows {
        w.write_record(&row).map_err(|e| CliError::csv(&path, e))?;
    }
    w.flush().map_err(|e| CliError::io(&path, e))?;
    Ok(path)
}

pub fn read_manifest(dir: &Path) -> CliResult<Vec<ManifestEntry>> {
    let path = dir.join(MANIFEST);
    let mut r = csv::Reader::from_path(&path).map_err(|e| CliError::csv(&path, e))?;
    let mut out = Vec::new();
    for rec in r.records() {
        let rec = rec.map_err(|e| CliError::csv(&path, e))?;
        let bad = |what: &str| CliError::Config {
            path: path.clone(),
            reason: format!("malformed {what} in row {}", out.len() + 1),
        };
        out.push(ManifestEntry {
            stage: rec
                .get(0)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("stage"))?,
            life_fraction: rec
                .get(1)
                .and_then(|v| v.parse().ok())
                .ok_or_else(|| bad("life_fraction"))?,
            file: rec.get(2).ok_or_else(|| bad("file"))?.to_string(),
            sha256: rec.get(3).ok_or_else(|| bad("sha256"))?.to_string(),
        });
    }
    if out.is_empty() {
        return Err(CliError::Config {
            path,
            reason: "manifest lists no stages".into(),
        });
    }
    Ok(out)
}

/// A dataset directory with its manifest already parsed.
#[derive(Debug, Clone)]
pub struct Dataset {
    pub dir: PathBuf,
    pub entries: Vec<ManifestEntry>,
}

impl Dataset {
    pub fn open(dir: &Path) -> CliResult<Self> {
        Ok(Self {
            dir: dir.to_path_buf(),
            entries: read_manifest(dir)?,
        })
    }

    pub fn path_of(&self, entry: &ManifestEntry) -> PathBuf {
        self.dir.join(&entry.file)
    }

    /// The stage models are trained on.
    pub fn training_path(&self) -> PathBuf {
        self.path_of(&self.entries[0])
    }

    pub fn load(&self, entry: &ManifestEntry) -> CliResult<RecordSet> {
        let path = self.path_of(entry);
        read_recordset(&path).map_err(|e| CliError::data(&path, e))
    }

    pub fn load_all(&self) -> CliResult<Vec<RecordSet>> {
        self.entries.iter().map(|e| self.load(e)).collect()
    }
}
