//! `run.json` records: enough to repeat a command exactly.

use std::path::{Path, PathBuf};
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use graspforge::config::RunConfig;
use graspforge::datagen::build_id;
use serde::Serialize;
use sha2::{Digest, Sha256};

#[derive(Serialize)]
struct RunRecord<'a> {
    command: &'a str,
    argv: &'a [String],
    build_id: String,
    seed: u64,
    started_unix: u64,
    seconds: f64,
    config: &'a RunConfig,
    /// Input files with their sha256, in argument order.
    inputs: Vec<(String, String)>,
    extra: serde_json::Value,
}

pub struct Run<'a> {
    command: &'a str,
    argv: &'a [String],
    seed: u64,
    config: &'a RunConfig,
    started: SystemTime,
    clock: Instant,
    inputs: Vec<(String, String)>,
}

impl<'a> Run<'a> {
    pub fn start(command: &'a str, argv: &'a [String], seed: u64, config: &'a RunConfig) -> Self {
        Self {
            command,
            argv,
            seed,
            config,
            started: SystemTime::now(),
            clock: Instant::now(),
            inputs: Vec::new(),
        }
    }

    /// Records an input file by content hash.
    pub fn input(&mut self, path: &Path) -> anyhow::Result<()> {
        let bytes = std::fs::read(path).map_err(|e| anyhow::anyhow!("reading {}: {e}", path.display()))?;
        self.inputs.push((path.display().to_string(), hex::encode(Sha256::digest(&bytes))));
        Ok(())
    }

    pub fn finish(self, path: &Path, extra: serde_json::Value) -> anyhow::Result<()> {
        let rec = RunRecord {
            command: self.command,
            argv: self.argv,
            build_id: build_id(),
            seed: self.seed,
            started_unix: self.started.duration_since(UNIX_EPOCH).map(|d| d.as_secs()).unwrap_or(0),
            seconds: self.clock.elapsed().as_secs_f64(),
            config: self.config,
            inputs: self.inputs,
            extra,
        };
        std::fs::write(path, serde_json::to_string_pretty(&rec)? + "\n")
            .map_err(|e| anyhow::anyhow!("writing {}: {e}", path.display()))?;
        Ok(())
    }
}

/// Provenance file of a single-file output: `<file>.run.json`.
pub fn beside(file: &Path) -> PathBuf {
    let mut name = file.file_name().map(|n| n.to_os_string()).unwrap_or_default();
    name.push(".run.json");
    file.with_file_name(name)
}
