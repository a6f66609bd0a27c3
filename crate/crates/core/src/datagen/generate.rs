//! Parallel, seed-ordered dataset generation.

use rayon::prelude::*;

use super::record::{episode_seed, run_episode, EpisodeRecord, EpisodeResult};
use crate::policy::{GraspEnv, ResidualPolicy};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GenerateOptions {
    /// Records to store.
    pub episodes: usize,
    pub seed: u64,
    pub keep_failures: bool,
    /// Slots run in parallel before the ordered merge.
    pub chunk: usize,
    /// Upper bound on slots; generation stops early when reached.
    pub max_attempts: usize,
}

impl GenerateOptions {
    pub fn new(episodes: usize, seed: u64) -> Self {
        Self {
            episodes,
            seed,
            keep_failures: false,
            chunk: 64,
            max_attempts: 50 * episodes + 100,
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq)]
pub struct Generated {
    pub records: Vec<EpisodeRecord>,
    /// Slots consumed, counting unstored failures and skips.
    pub attempted: usize,
    pub skipped: usize,
    pub failures_seen: usize,
}

/// Runs slots `0, 1, 2, ...` until `episodes` records are stored. Slots are
/// evaluated in parallel chunks and merged in index order, so the output
/// depends only on the seed.
pub fn generate(
    env: &GraspEnv,
    policy: &dyn ResidualPolicy,
    opts: &GenerateOptions,
    mut progress: impl FnMut(&Generated),
) -> Generated {
    let mut out = Generated::default();
    let keep = opts.keep_failures;
    let mut next = 0usize;
    while out.records.len() < opts.episodes && next < opts.max_attempts {
        let end = (next + opts.chunk.max(1)).min(opts.max_attempts);
        let results: Vec<EpisodeResult> = (next..end)
            .into_par_iter()
            .map(|i| run_episode(env, i as u64, episode_seed(opts.seed, i as u64), policy, |ok| ok || keep))
            .collect();
        for r in results {
            if out.records.len() >= opts.episodes {
                break;
            }
            out.attempted += 1;
            match r {
                EpisodeResult::Skipped { .. } => out.skipped += 1,
                EpisodeResult::Record(rec) => {
                    if !rec.meta.success {
                        out.failures_seen += 1;
                    }
                    if rec.meta.success || keep {
                        out.records.push(rec);
                    }
                }
            }
        }
        next = end;
        progress(&out);
    }
    if out.records.len() < opts.episodes {
        log::warn!(
            "stored {} of {} episodes after {} attempts",
            out.records.len(),
            opts.episodes,
            out.attempted
        );
    }
    out
}
