//! Result directory: one JSON file per run plus a CSV index.
//!
//! Layout under the root: `index.csv` and `runs/<run-id>.{json,csv,dat,gp}`.
//! Every file is written to a temporary sibling and renamed into place.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

use crate::error::{CliError, CliResult};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IndexEntry {
    pub run_id: String,
    pub command: String,
    pub p: f64,
    pub alpha: f64,
    pub delta: f64,
    /// Blocklengths joined with `;`.
    pub n_list: String,
    pub seed: u64,
    pub passed: bool,
    pub file: String,
}

pub struct Store {
    root: PathBuf,
}

/// Hex SHA-256 of the canonical (key-sorted) JSON text of `config`, which
/// carries the seed.
pub fn run_id(command: &str, config: &Value) -> String {
    let mut hasher = Sha256::new();
    hasher.update(command.as_bytes());
    hasher.update(b"\n");
    hasher.update(serde_json::to_string(config).expect("JSON values serialize").as_bytes());
    hasher.finalize().iter().take(12).map(|b| format!("{b:02x}")).collect()
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> CliResult<Self> {
        let root = root.into();
        let runs = root.join("runs");
        fs::create_dir_all(&runs).map_err(|e| CliError::io(&runs, e))?;
        Ok(Self { root })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn run_path(&self, id: &str, extension: &str) -> PathBuf {
        self.root.join("runs").join(format!("{id}.{extension}"))
    }

    /// The stored result of a finished run, if any.
    pub fn load(&self, id: &str) -> CliResult<Option<Value>> {
        let path = self.run_path(id, "json");
        match fs::read_to_string(&path) {
            Ok(text) => serde_json::from_str(&text).map(Some).map_err(|e| CliError::Parse {
                path,
                message: e.to_string(),
            }),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => Ok(None),
            Err(e) => Err(CliError::io(path, e)),
        }
    }

    pub fn write_atomic(&self, path: &Path, contents: &str) -> CliResult<()> {
        let dir = path.parent().unwrap_or(&self.root);
        let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| CliError::io(dir, e))?;
        tmp.write_all(contents.as_bytes()).map_err(|e| CliError::io(tmp.path(), e))?;
        tmp.as_file().sync_all().map_err(|e| CliError::io(tmp.path(), e))?;
        tmp.persist(path).map_err(|e| CliError::io(path, e.error))?;
        Ok(())
    }

    pub fn entries(&self) -> CliResult<Vec<IndexEntry>> {
        let path = self.root.join("index.csv");
        if !path.exists() {
            return Ok(Vec::new());
        }
        let mut reader = csv::Reader::from_path(&path).map_err(|e| CliError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        reader
            .deserialize()
            .collect::<Result<Vec<IndexEntry>, _>>()
            .map_err(|e| CliError::Parse {
                path,
                message: e.to_string(),
            })
    }

    /// Adds `entry` unless its run id is already indexed; returns whether a
    /// row was added.
    pub fn record(&self, entry: IndexEntry) -> CliResult<bool> {
        let mut entries = self.entries()?;
        if entries.iter().any(|e| e.run_id == entry.run_id) {
            return Ok(false);
        }
        entries.push(entry);
        let path = self.root.join("index.csv");
        let mut writer = csv::Writer::from_writer(Vec::new());
        for e in &entries {
            writer.serialize(e).map_err(|e| CliError::Parse {
                path: path.clone(),
                message: e.to_string(),
            })?;
        }
        let bytes = writer.into_inner().map_err(|e| CliError::Parse {
            path: path.clone(),
            message: e.to_string(),
        })?;
        self.write_atomic(&path, &String::from_utf8(bytes).expect("csv output is UTF-8"))?;
        Ok(true)
    }
}
