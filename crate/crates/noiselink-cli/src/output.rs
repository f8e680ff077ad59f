//! Deterministic result writers.
//!
//! Every run writes into one output directory: data as CSV, summary
//! statistics as `results.json`, and bookkeeping as `run_meta.json`. All
//! data files are byte-reproducible for a fixed scenario and seed — floats
//! are printed with Rust's shortest-round-trip formatting and JSON field
//! order is fixed. The only non-reproducible value is the wall-clock
//! timestamp, which is confined to a single line of `run_meta.json` so
//! reruns can be compared line-by-line.

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::Serialize;

#[derive(Debug, thiserror::Error)]
#[error("failed writing {path}: {source}")]
pub struct OutputError {
    pub path: String,
    #[source]
    pub source: std::io::Error,
}

pub struct OutDir {
    root: PathBuf,
}

impl OutDir {
    pub fn create(root: &Path) -> Result<Self, OutputError> {
        fs::create_dir_all(root).map_err(|e| OutputError {
            path: root.display().to_string(),
            source: e,
        })?;
        Ok(OutDir {
            root: root.to_path_buf(),
        })
    }

    pub fn path(&self, file: &str) -> PathBuf {
        self.root.join(file)
    }

    /// Write a CSV file: header row plus stringified rows.
    pub fn write_csv(
        &self,
        file: &str,
        header: &[&str],
        rows: &[Vec<String>],
    ) -> Result<(), OutputError> {
        let path = self.path(file);
        let mut text = String::new();
        text.push_str(&header.join(","));
        text.push('\n');
        for row in rows {
            text.push_str(&row.join(","));
            text.push('\n');
        }
        fs::write(&path, text).map_err(|e| OutputError {
            path: path.display().to_string(),
            source: e,
        })
    }

    /// Write a pretty-printed JSON file from any serializable value.
    pub fn write_json<T: Serialize>(&self, file: &str, value: &T) -> Result<(), OutputError> {
        let path = self.path(file);
        let mut text = serde_json::to_string_pretty(value).expect("serializable results");
        text.push('\n');
        fs::write(&path, text).map_err(|e| OutputError {
            path: path.display().to_string(),
            source: e,
        })
    }

    /// Write `run_meta.json`: scenario name, command, seed, trials, RNG
    /// identity, and the lone timestamp line.
    pub fn write_meta(&self, meta: &RunMeta) -> Result<(), OutputError> {
        self.write_json("run_meta.json", meta)
    }
}

/// Bookkeeping for one run. `timestamp_unix` is the only field that varies
/// between identical reruns, and serialization keeps it on its own line.
#[derive(Debug, Serialize)]
pub struct RunMeta {
    pub scenario: String,
    pub command: String,
    pub seed: u64,
    pub trials: u64,
    pub rng: &'static str,
    pub timestamp_unix: u64,
}

impl RunMeta {
    pub fn new(scenario: String, command: &str, seed: u64, trials: u64) -> Self {
        let timestamp_unix = std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .map(|d| d.as_secs())
            .unwrap_or(0);
        RunMeta {
            scenario,
            command: command.to_string(),
            seed,
            trials,
            rng: noiselink::receiver_model::RNG_ALGORITHM,
            timestamp_unix,
        }
    }
}

/// Format a float for CSV output (shortest representation that round-trips).
pub fn fmt(x: f64) -> String {
    format!("{x}")
}

/// Print a one-line progress note to stderr (kept off stdout so piping CSV
/// summaries stays clean).
pub fn note(msg: &str) {
    let _ = writeln!(std::io::stderr(), "{msg}");
}
