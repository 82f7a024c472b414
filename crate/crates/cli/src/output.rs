//! CSV emission and the run manifest.

use std::fs;
use std::path::{Path, PathBuf};

use chrono::{DateTime, SecondsFormat, Utc};
use serde::Serialize;
use sha2::{Digest, Sha256};
use tbmps::model::{ConfigFile, ExperimentConfig};

use crate::error::{CliError, CliResult};

pub const MANIFEST: &str = "manifest.json";

/// Twelve significant digits.
pub fn num(x: f64) -> String {
    format!("{x:.11e}")
}

/// Reads and validates a configuration document.
pub fn parse_config(path: &Path) -> CliResult<ExperimentConfig> {
    let text = fs::read_to_string(path).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    let file: ConfigFile = toml::from_str(&text).map_err(|e| CliError::Config(format!("{}: {e}", path.display())))?;
    Ok(file.resolve()?)
}

#[derive(Clone, Debug, Serialize)]
pub struct FileEntry {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Clone, Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub version: String,
    pub started: String,
    pub finished: String,
    pub config: ConfigFile,
    pub cumulative_discarded_weight: f64,
    pub files: Vec<FileEntry>,
    #[serde(skip_serializing_if = "serde_json::Map::is_empty")]
    pub notes: serde_json::Map<String, serde_json::Value>,
}

/// Output directory that remembers the digest of everything it writes.
pub struct OutputDir {
    dir: PathBuf,
    command: String,
    started: DateTime<Utc>,
    files: Vec<FileEntry>,
    notes: serde_json::Map<String, serde_json::Value>,
}

impl OutputDir {
    pub fn create(dir: &Path, command: &str) -> CliResult<Self> {
        fs::create_dir_all(dir)?;
        Ok(Self {
            dir: dir.to_path_buf(),
            command: command.to_string(),
            started: Utc::now(),
            files: Vec::new(),
            notes: serde_json::Map::new(),
        })
    }

    pub fn write_csv<I>(&mut self, name: &str, header: &[&str], rows: I) -> CliResult<()>
    where
        I: IntoIterator<Item = Vec<String>>,
    {
        let mut w = csv::Writer::from_writer(Vec::new());
        w.write_record(header)?;
        for row in rows {
            w.write_record(&row)?;
        }
        let body = w.into_inner().map_err(|e| CliError::Runtime(e.to_string()))?;
        self.write_bytes(name, &body)
    }

    fn write_bytes(&mut self, name: &str, body: &[u8]) -> CliResult<()> {
        fs::write(self.dir.join(name), body)?;
        self.files.retain(|f| f.name != name);
        self.files.push(FileEntry { name: name.to_string(), bytes: body.len(), sha256: sha256_hex(body) });
        log::info!("wrote {}", self.dir.join(name).display());
        Ok(())
    }

    pub fn note(&mut self, key: &str, value: impl Into<serde_json::Value>) {
        self.notes.insert(key.to_string(), value.into());
    }

    pub fn finish(self, cfg: &ExperimentConfig, discarded: f64) -> CliResult<RunManifest> {
        let manifest = RunManifest {
            command: self.command,
            version: env!("CARGO_PKG_VERSION").to_string(),
            started: self.started.to_rfc3339_opts(SecondsFormat::Millis, true),
            finished: Utc::now().to_rfc3339_opts(SecondsFormat::Millis, true),
            config: cfg.to_file(),
            cumulative_discarded_weight: discarded,
            files: self.files,
            notes: self.notes,
        };
        fs::write(self.dir.join(MANIFEST), serde_json::to_vec_pretty(&manifest)?)?;
        Ok(manifest)
    }
}

pub fn sha256_hex(body: &[u8]) -> String {
    format!("{:x}", Sha256::digest(body))
}
