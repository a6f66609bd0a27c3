//! Dataset directory: `manifest.json` plus one JSON episode per line in
//! `episodes.jsonl`.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::record::EpisodeRecord;
use super::sampling::SamplingSpec;
use crate::sim::SimConfig;
use crate::skill::SkillConfig;

pub const FORMAT_VERSION: u32 = 1;
pub const MANIFEST_FILE: &str = "manifest.json";
pub const EPISODES_FILE: &str = "episodes.jsonl";

/// Identifies the producing build; override with `GRASPFORGE_BUILD_ID` at compile time.
pub fn build_id() -> String {
    match option_env!("GRASPFORGE_BUILD_ID") {
        Some(id) => id.to_string(),
        None => format!("graspforge-{}", env!("CARGO_PKG_VERSION")),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub build_id: String,
    pub seed: u64,
    /// Stored episodes.
    pub episodes: usize,
    pub successes: usize,
    pub failures: usize,
    /// Generation slots run, including unstored failures and skips.
    pub attempted: usize,
    pub skipped: usize,
    pub steps: usize,
    pub keep_failures: bool,
    pub zero_residual: bool,
    pub sampling: SamplingSpec,
    pub sim: SimConfig,
    pub skill: SkillConfig,
    /// SHA-256 of `episodes.jsonl` (hex).
    pub content_hash: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    pub manifest: Manifest,
    pub records: Vec<EpisodeRecord>,
}

#[derive(Debug, thiserror::Error)]
pub enum DatasetError {
    #[error("dataset io at {path}: {source}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("dataset format version {found} is not supported (expected {FORMAT_VERSION})")]
    Version { found: u32 },
    #[error("episode file hash {found} does not match manifest hash {expected}")]
    Hash { expected: String, found: String },
    #[error("dataset is truncated: manifest lists {expected} episodes, file holds {found}")]
    Truncated { expected: usize, found: usize },
    #[error("malformed {what} at line {line}: {message}")]
    Parse { what: &'static str, line: usize, message: String },
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatasetError + '_ {
    move |source| DatasetError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// Settings recorded with a dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetInfo {
    pub seed: u64,
    pub attempted: usize,
    pub skipped: usize,
    pub keep_failures: bool,
    pub zero_residual: bool,
    pub sampling: SamplingSpec,
    pub sim: SimConfig,
    pub skill: SkillConfig,
}

/// Serializes one record as a single line (no trailing newline).
pub fn record_line(r: &EpisodeRecord) -> String {
    serde_json::to_string(r).expect("records serialize")
}

pub fn write_dataset(dir: &Path, records: &[EpisodeRecord], info: &DatasetInfo) -> Result<Manifest, DatasetError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let path = dir.join(EPISODES_FILE);
    let file = std::fs::File::create(&path).map_err(io_err(&path))?;
    let mut w = BufWriter::new(file);
    let mut hasher = Sha256::new();
    for r in records {
        let mut line = record_line(r);
        line.push('\n');
        hasher.update(line.as_bytes());
        w.write_all(line.as_bytes()).map_err(io_err(&path))?;
    }
    w.flush().map_err(io_err(&path))?;
    let successes = records.iter().filter(|r| r.meta.success).count();
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        build_id: build_id(),
        seed: info.seed,
        episodes: records.len(),
        successes,
        failures: records.len() - successes,
        attempted: info.attempted,
        skipped: info.skipped,
        steps: records.iter().map(|r| r.steps.len()).sum(),
        keep_failures: info.keep_failures,
        zero_residual: info.zero_residual,
        sampling: info.sampling.clone(),
        sim: info.sim.clone(),
        skill: info.skill.clone(),
        content_hash: hex::encode(hasher.finalize()),
    };
    let mpath = dir.join(MANIFEST_FILE);
    let text = serde_json::to_string_pretty(&manifest).expect("manifest serializes");
    std::fs::write(&mpath, text + "\n").map_err(io_err(&mpath))?;
    Ok(manifest)
}

pub fn read_manifest(dir: &Path) -> Result<Manifest, DatasetError> {
    let mpath = dir.join(MANIFEST_FILE);
    let text = std::fs::read_to_string(&mpath).map_err(io_err(&mpath))?;
    // Check the version before the strict parse so old files get a clear error.
    let raw: serde_json::Value = serde_json::from_str(&text).map_err(|e| DatasetError::Parse {
        what: "manifest",
        line: e.line(),
        message: e.to_string(),
    })?;
    let found = raw.get("format_version").and_then(|v| v.as_u64()).unwrap_or(0) as u32;
    if found != FORMAT_VERSION {
        return Err(DatasetError::Version { found });
    }
    serde_json::from_value(raw).map_err(|e| DatasetError::Parse {
        what: "manifest",
        line: 0,
        message: e.to_string(),
    })
}

/// Streams records in file order after verifying version, hash and count.
pub fn for_each_record(dir: &Path, mut f: impl FnMut(EpisodeRecord)) -> Result<Manifest, DatasetError> {
    let manifest = read_manifest(dir)?;
    let path = dir.join(EPISODES_FILE);
    let (found, lines, ends_clean) = hash_file(&path)?;
    if found != manifest.content_hash {
        if lines < manifest.episodes || !ends_clean {
            return Err(DatasetError::Truncated {
                expected: manifest.episodes,
                found: lines,
            });
        }
        return Err(DatasetError::Hash {
            expected: manifest.content_hash.clone(),
            found,
        });
    }
    let reader = BufReader::new(std::fs::File::open(&path).map_err(io_err(&path))?);
    let mut n = 0;
    for (i, line) in reader.lines().enumerate() {
        let line = line.map_err(io_err(&path))?;
        if line.is_empty() {
            continue;
        }
        let rec: EpisodeRecord = serde_json::from_str(&line).map_err(|e| DatasetError::Parse {
            what: "episode",
            line: i + 1,
            message: e.to_string(),
        })?;
        f(rec);
        n += 1;
    }
    if n != manifest.episodes {
        return Err(DatasetError::Truncated {
            expected: manifest.episodes,
            found: n,
        });
    }
    Ok(manifest)
}

/// Hex SHA-256, newline count and whether the file is empty or ends in a newline.
fn hash_file(path: &Path) -> Result<(String, usize, bool), DatasetError> {
    let mut reader = BufReader::with_capacity(1 << 20, std::fs::File::open(path).map_err(io_err(path))?);
    let mut hasher = Sha256::new();
    let (mut lines, mut last) = (0, b'\n');
    loop {
        let buf = reader.fill_buf().map_err(io_err(path))?;
        if buf.is_empty() {
            break;
        }
        hasher.update(buf);
        lines += buf.iter().filter(|b| **b == b'\n').count();
        last = buf[buf.len() - 1];
        let n = buf.len();
        reader.consume(n);
    }
    Ok((hex::encode(hasher.finalize()), lines, last == b'\n'))
}

pub fn read_dataset(dir: &Path) -> Result<Dataset, DatasetError> {
    let mut records = Vec::new();
    let manifest = for_each_record(dir, |r| records.push(r))?;
    Ok(Dataset { manifest, records })
}
