//! Run manifests: one JSON line per command invocation, appended to
//! `runs.jsonl` in the command's output directory.

use std::fs::OpenOptions;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::time::Instant;

use serde::Serialize;

use crate::error::{io_error, CliResult};

pub const MANIFEST_FILE: &str = "runs.jsonl";

#[derive(Debug, Serialize)]
pub struct RunManifest {
    pub command: String,
    pub config: serde_json::Value,
    pub seed: u64,
    pub checkpoint: Option<PathBuf>,
    pub outputs: Vec<PathBuf>,
    pub wall_ms: u64,
}

impl RunManifest {
    pub fn new(command: &str, config: serde_json::Value, seed: u64) -> Self {
        Self {
            command: command.into(),
            config,
            seed,
            checkpoint: None,
            outputs: Vec::new(),
            wall_ms: 0,
        }
    }

    pub fn append(mut self, dir: &Path, started: Instant) -> CliResult<()> {
        self.wall_ms = started.elapsed().as_millis() as u64;
        let path = dir.join(MANIFEST_FILE);
        let mut f = OpenOptions::new()
            .create(true)
            .append(true)
            .open(&path)
            .map_err(|e| io_error(&path, e))?;
        let line = serde_json::to_string(&self).expect("manifest serializes");
        writeln!(f, "{line}").map_err(|e| io_error(&path, e))
    }
}

/// Directory holding `path`, `.` for bare file names.
pub fn parent_dir(path: &Path) -> PathBuf {
    match path.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    }
}
