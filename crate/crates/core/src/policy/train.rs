//! Residual-policy training loop.

use std::io::Write;
use std::time::Instant;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::GaussianPolicy;
use super::mlp::{Mlp, MlpError};
use super::norm::ObsNorm;
use super::ppo::{ppo_update, PpoConfig, PpoError, PpoOptimizer, UpdateMetrics};
use super::rollout::{collect_rollouts, EnvContext, GraspEnv, RolloutError, RolloutStats, TrainedPolicy};

/// Stream offset separating optimizer randomness from the episode contexts.
const OPTIMIZER_STREAM: u64 = 1 << 40;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainState {
    pub policy: TrainedPolicy,
    pub value: Mlp<f64>,
    pub optimizer: PpoOptimizer,
    /// Updates completed so far.
    pub update: usize,
}

impl TrainState {
    pub fn new(env: &GraspEnv, cfg: &PpoConfig, seed: u64) -> Result<Self, MlpError> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(OPTIMIZER_STREAM - 1);
        let sizes = cfg.policy_sizes(env.obs_dim(), env.act_dim());
        let mean = Mlp::init(&sizes, 0.01, &mut rng)?;
        let log_std = (0..env.act_dim())
            .map(|k| if k < 6 { cfg.init_log_std_palm } else { cfg.init_log_std })
            .collect();
        let policy = GaussianPolicy::new(mean, log_std)?;
        let value = Mlp::init(&cfg.policy_sizes(env.obs_dim(), 1), 1.0, &mut rng)?;
        let optimizer = PpoOptimizer::new(&policy, &value, cfg.learning_rate);
        Ok(Self {
            policy: TrainedPolicy {
                policy,
                norm: ObsNorm::new(env.obs_dim()),
            },
            value,
            optimizer,
            update: 0,
        })
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum TrainError {
    #[error("rollout failed in update {update}: {source}")]
    Rollout { update: usize, source: RolloutError },
    #[error("optimization failed in update {update}: {source}")]
    Ppo { update: usize, source: PpoError },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct UpdateRecord {
    /// One-based index of the finished update.
    pub update: usize,
    pub stats: RolloutStats,
    pub metrics: UpdateMetrics,
    pub seconds: f64,
}

pub const METRICS_HEADER: &str = "update,mean_step_reward,mean_return,success_rate,episodes,divergences,clip_fraction,policy_loss,value_loss,entropy,approx_kl,mean_ratio,seconds";

impl UpdateRecord {
    pub fn csv_row(&self) -> String {
        let (s, m) = (&self.stats, &self.metrics);
        format!(
            "{},{:.6},{:.6},{:.6},{},{},{:.6},{:.6},{:.6},{:.6},{:.6},{:.6},{:.3}",
            self.update,
            s.mean_step_reward,
            s.mean_episode_return,
            s.success_rate(),
            s.episodes,
            s.divergences,
            m.clip_fraction,
            m.policy_loss,
            m.value_loss,
            m.entropy,
            m.approx_kl,
            m.mean_ratio,
            self.seconds
        )
    }
}

/// Appends rows, writing the header when the file is new or empty.
pub fn append_metrics(path: &std::path::Path, rows: &[UpdateRecord]) -> std::io::Result<()> {
    let fresh = std::fs::metadata(path).map(|m| m.len() == 0).unwrap_or(true);
    let mut f = std::fs::OpenOptions::new().create(true).append(true).open(path)?;
    if fresh {
        writeln!(f, "{METRICS_HEADER}")?;
    }
    for r in rows {
        writeln!(f, "{}", r.csv_row())?;
    }
    Ok(())
}

/// One update: fresh contexts derived from `(seed, update)`, a rollout with
/// frozen normalization, then the normalizer and the networks are updated.
pub fn train_update(env: &GraspEnv, cfg: &PpoConfig, state: &mut TrainState, seed: u64) -> Result<UpdateRecord, TrainError> {
    let t0 = Instant::now();
    let u = state.update;
    let n = cfg.contexts;
    let mut contexts: Vec<EnvContext> = (0..n as u64)
        .map(|i| EnvContext::new(seed, u as u64 * n as u64 + i))
        .collect();
    let per_ctx = cfg.rollout_steps.div_ceil(n);
    let rollout = collect_rollouts(
        env,
        &mut contexts,
        &state.policy.policy,
        &state.value,
        &state.policy.norm,
        per_ctx,
        cfg.gamma,
        cfg.lambda,
        true,
    )
    .map_err(|source| TrainError::Rollout { update: u + 1, source })?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(OPTIMIZER_STREAM + u as u64);
    let metrics = ppo_update(
        &mut state.policy.policy,
        &mut state.value,
        &mut state.optimizer,
        &rollout.batch,
        cfg,
        &mut rng,
    )
    .map_err(|source| TrainError::Ppo { update: u + 1, source })?;
    state.policy.norm.update(&rollout.raw_obs);
    state.update += 1;
    Ok(UpdateRecord {
        update: state.update,
        stats: rollout.stats,
        metrics,
        seconds: t0.elapsed().as_secs_f64(),
    })
}

/// Runs updates until `state.update == until`, reporting each one.
pub fn train(
    env: &GraspEnv,
    cfg: &PpoConfig,
    state: &mut TrainState,
    seed: u64,
    until: usize,
    mut on_update: impl FnMut(&TrainState, &UpdateRecord),
) -> Result<Vec<UpdateRecord>, TrainError> {
    let mut out = Vec::new();
    while state.update < until {
        let rec = train_update(env, cfg, state, seed)?;
        log::info!(
            "update {} success {:.3} ({} episodes) step reward {:.4} clip {:.3} kl {:.4} {:.1}s",
            rec.update,
            rec.stats.success_rate(),
            rec.stats.episodes,
            rec.stats.mean_step_reward,
            rec.metrics.clip_fraction,
            rec.metrics.approx_kl,
            rec.seconds
        );
        on_update(state, &rec);
        out.push(rec);
    }
    Ok(out)
}
