//! Run directories `out/<run-id>/` with CSV/JSON artifacts and a versioned
//! `manifest.json` listing every file written.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::CliError;

pub const MANIFEST_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutputEntry {
    pub file: String,
    pub description: String,
    /// Data rows (CSV) or 1 (JSON).
    pub rows: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunManifest {
    pub manifest_version: u32,
    pub subcommand: String,
    pub run_id: String,
    /// SHA-256 of the canonical configuration (seed included).
    pub config_hash: String,
    pub seed: u64,
    /// Labels of the random streams derived from the seed.
    pub streams: Vec<String>,
    pub module_versions: BTreeMap<String, String>,
    pub threads: usize,
    pub wall_clock_seconds: f64,
    pub exit_code: i32,
    pub status: String,
    pub warnings: Vec<String>,
    pub outputs: Vec<OutputEntry>,
}

/// SHA-256 hex digest of `text`.
pub fn hash_text(text: &str) -> String {
    Sha256::digest(text.as_bytes())
        .iter()
        .map(|b| format!("{b:02x}"))
        .collect()
}

/// `<subcommand>-<first 12 hex digits of the config hash>`.
pub fn run_id(subcommand: &str, config_hash: &str) -> String {
    format!("{subcommand}-{}", &config_hash[..12])
}

/// Single writer for one run directory.
pub struct RunDir {
    path: PathBuf,
    outputs: Vec<OutputEntry>,
}

fn io_err(path: &Path, e: impl std::fmt::Display) -> CliError {
    CliError::Io(format!("{}: {e}", path.display()))
}

impl RunDir {
    pub fn create(base: &Path, run_id: &str) -> Result<Self, CliError> {
        let path = base.join(run_id);
        std::fs::create_dir_all(&path).map_err(|e| io_err(&path, e))?;
        Ok(Self {
            path,
            outputs: Vec::new(),
        })
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes a CSV file, preceded by `# ` comment lines when given.
    pub fn csv(
        &mut self,
        name: &str,
        description: &str,
        comments: &[String],
        header: &[&str],
        rows: impl IntoIterator<Item = Vec<String>>,
    ) -> Result<(), CliError> {
        let path = self.path.join(name);
        let mut file = BufWriter::new(File::create(&path).map_err(|e| io_err(&path, e))?);
        for c in comments {
            writeln!(file, "# {c}").map_err(|e| io_err(&path, e))?;
        }
        let mut w = csv::Writer::from_writer(file);
        w.write_record(header).map_err(|e| io_err(&path, e))?;
        let mut count = 0;
        for row in rows {
            w.write_record(&row).map_err(|e| io_err(&path, e))?;
            count += 1;
        }
        w.flush().map_err(|e| io_err(&path, e))?;
        self.outputs.push(OutputEntry {
            file: name.to_string(),
            description: description.to_string(),
            rows: count,
        });
        Ok(())
    }

    pub fn json(
        &mut self,
        name: &str,
        description: &str,
        value: &impl Serialize,
    ) -> Result<(), CliError> {
        let path = self.path.join(name);
        let text = serde_json::to_string_pretty(value).map_err(|e| io_err(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        self.outputs.push(OutputEntry {
            file: name.to_string(),
            description: description.to_string(),
            rows: 1,
        });
        Ok(())
    }

    /// Fills in the output list and writes `manifest.json`.
    pub fn finish(self, mut manifest: RunManifest) -> Result<PathBuf, CliError> {
        manifest.outputs = self.outputs;
        let path = self.path.join("manifest.json");
        let text = serde_json::to_string_pretty(&manifest).map_err(|e| io_err(&path, e))?;
        std::fs::write(&path, text + "\n").map_err(|e| io_err(&path, e))?;
        Ok(self.path)
    }
}

/// Plain decimal rendering used in every CSV (shortest round-trip form).
pub fn num(x: f64) -> String {
    format!("{x}")
}
