//! Grasp environment, rollout collection and paired evaluation.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::gae::{gae, normalize_advantages};
use super::gaussian::{log_prob, GaussianPolicy};
use super::mlp::{Mlp, MlpError};
use super::norm::ObsNorm;
use super::ppo::Batch;
use super::reward::{reward, RewardBreakdown, RewardWeights};
use crate::datagen::SamplingSpec;
use crate::episode::{Episode, EpisodeError, EpisodeSetup};
use crate::sim::{privileged_obs, Sim};
use crate::skill::SkillConfig;

/// Setups drawn before an episode is given up as unreachable.
pub const MAX_RESAMPLES: usize = 20;

/// Everything needed to run grasp episodes.
#[derive(Debug, Clone)]
pub struct GraspEnv {
    pub sim: Sim,
    pub skill: SkillConfig,
    pub sampling: SamplingSpec,
    pub reward: RewardWeights,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepOutcome {
    pub reward: RewardBreakdown,
    pub diverged: bool,
    pub done: bool,
}

impl GraspEnv {
    pub fn obs_dim(&self) -> usize {
        14 + 12 * self.sim.hand.finger_count()
    }

    pub fn act_dim(&self) -> usize {
        6 + self.sim.hand.joint_count()
    }

    /// Maps a normalized action in `[-1, 1]` to a residual.
    pub fn residual(&self, action: &[f64]) -> Vec<f64> {
        self.skill
            .residual_limits(self.sim.hand.joint_count())
            .iter()
            .zip(action)
            .map(|(l, u)| u.clamp(-1.0, 1.0) * l)
            .collect()
    }

    /// Draws setups until one is reachable.
    pub fn start_episode(&self, rng: &mut ChaCha8Rng) -> Result<Episode, EpisodeError> {
        let mut last = None;
        for _ in 0..MAX_RESAMPLES {
            let setup = self.sampling.sample(rng);
            match Episode::start(&self.sim, &self.skill, setup) {
                Ok(ep) => return Ok(ep),
                Err(e) => last = Some(e),
            }
        }
        Err(last.expect("at least one attempt"))
    }

    pub fn start_with(&self, setup: EpisodeSetup) -> Result<Episode, EpisodeError> {
        Episode::start(&self.sim, &self.skill, setup)
    }

    pub fn observe(&self, ep: &Episode) -> Vec<f64> {
        privileged_obs(&self.sim, &ep.state)
    }

    /// Applies a normalized action and scores the transition.
    pub fn step(&self, ep: &mut Episode, action: &[f64]) -> StepOutcome {
        let residual = self.residual(action);
        let a = ep.action(&self.sim, &self.skill, &residual);
        let prev = ep.state.clone();
        let diverged = ep.apply(&self.sim, &a).is_err();
        let reward = if diverged {
            RewardBreakdown {
                total: -self.reward.divergence_penalty,
                ..Default::default()
            }
        } else {
            reward(&self.sim.hand, &prev, &ep.state, &ep.plan.tip_targets, &self.reward)
        };
        StepOutcome {
            reward,
            diverged,
            done: ep.done(),
        }
    }
}

/// Maps raw privileged observations to normalized actions.
pub trait ResidualPolicy: Sync {
    fn act(&self, obs: &[f64]) -> Vec<f64>;
}

/// The reference trajectory alone.
#[derive(Debug, Clone, Copy)]
pub struct ZeroResidual {
    pub dim: usize,
}

impl ResidualPolicy for ZeroResidual {
    fn act(&self, _obs: &[f64]) -> Vec<f64> {
        vec![0.0; self.dim]
    }
}

/// Mean action of a trained policy under frozen normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainedPolicy {
    pub policy: GaussianPolicy,
    pub norm: ObsNorm,
}

impl ResidualPolicy for TrainedPolicy {
    fn act(&self, obs: &[f64]) -> Vec<f64> {
        self.policy
            .mean_action(&self.norm.normalize(obs))
            .expect("observation width matches the policy")
    }
}

/// One parallel episode stream with its own random numbers.
#[derive(Debug, Clone)]
pub struct EnvContext {
    pub rng: ChaCha8Rng,
    pub episode: Option<Episode>,
    pub episode_return: f64,
}

impl EnvContext {
    /// Stream `index` of the master seed.
    pub fn new(seed: u64, index: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        rng.set_stream(index);
        Self {
            rng,
            episode: None,
            episode_return: 0.0,
        }
    }

    pub fn contexts(seed: u64, n: usize) -> Vec<Self> {
        (0..n as u64).map(|i| Self::new(seed, i)).collect()
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum RolloutError {
    #[error(transparent)]
    Episode(#[from] EpisodeError),
    #[error(transparent)]
    Shape(#[from] MlpError),
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RolloutStats {
    pub steps: usize,
    pub episodes: usize,
    pub successes: usize,
    pub divergences: usize,
    pub mean_step_reward: f64,
    pub mean_episode_return: f64,
}

impl RolloutStats {
    pub fn success_rate(&self) -> f64 {
        if self.episodes == 0 {
            0.0
        } else {
            self.successes as f64 / self.episodes as f64
        }
    }
}

#[derive(Debug, Clone, Default)]
struct Segment {
    raw_obs: Vec<f64>,
    obs: Vec<f64>,
    actions: Vec<f64>,
    log_probs: Vec<f64>,
    values: Vec<f64>,
    rewards: Vec<f64>,
    dones: Vec<bool>,
    returns_done: Vec<f64>,
    successes: usize,
    divergences: usize,
}

/// Gathered experience: the training batch (advantages normalized) and the
/// raw observations for updating the normalizer.
#[derive(Debug, Clone)]
pub struct Rollout {
    pub batch: Batch,
    pub raw_obs: Vec<f64>,
    pub stats: RolloutStats,
}

/// Runs `steps` transitions in every context, in parallel. With
/// `stochastic = false` the policy mean is executed.
#[allow(clippy::too_many_arguments)]
pub fn collect_rollouts(
    env: &GraspEnv,
    contexts: &mut [EnvContext],
    policy: &GaussianPolicy,
    value: &Mlp<f64>,
    norm: &ObsNorm,
    steps: usize,
    gamma: f64,
    lambda: f64,
    stochastic: bool,
) -> Result<Rollout, RolloutError> {
    let segments: Vec<Segment> = contexts
        .par_iter_mut()
        .map(|ctx| run_segment(env, ctx, policy, value, norm, steps, stochastic))
        .collect::<Result<_, _>>()?;

    let (od, ad) = (env.obs_dim(), env.act_dim());
    let mut batch = Batch {
        obs_dim: od,
        act_dim: ad,
        ..Default::default()
    };
    let mut raw_obs = Vec::new();
    let mut stats = RolloutStats::default();
    let mut reward_sum = 0.0;
    let mut finished = Vec::new();
    for seg in segments {
        let (adv, ret) = gae(&seg.rewards, &seg.values, &seg.dones, gamma, lambda).expect("segment lengths agree");
        reward_sum += seg.rewards.iter().sum::<f64>();
        stats.steps += seg.rewards.len();
        stats.successes += seg.successes;
        stats.divergences += seg.divergences;
        finished.extend(seg.returns_done);
        raw_obs.extend(seg.raw_obs);
        batch.obs.extend(seg.obs);
        batch.actions.extend(seg.actions);
        batch.log_probs.extend(seg.log_probs);
        batch.advantages.extend(adv);
        batch.returns.extend(ret);
    }
    normalize_advantages(&mut batch.advantages);
    stats.episodes = finished.len();
    stats.mean_step_reward = reward_sum / stats.steps.max(1) as f64;
    stats.mean_episode_return = if finished.is_empty() {
        0.0
    } else {
        finished.iter().sum::<f64>() / finished.len() as f64
    };
    Ok(Rollout { batch, raw_obs, stats })
}

fn run_segment(
    env: &GraspEnv,
    ctx: &mut EnvContext,
    policy: &GaussianPolicy,
    value: &Mlp<f64>,
    norm: &ObsNorm,
    steps: usize,
    stochastic: bool,
) -> Result<Segment, RolloutError> {
    let mut seg = Segment::default();
    for _ in 0..steps {
        if ctx.episode.is_none() {
            ctx.episode = Some(env.start_episode(&mut ctx.rng)?);
            ctx.episode_return = 0.0;
        }
        let ep = ctx.episode.as_mut().expect("episode started");
        let raw = env.observe(ep);
        let obs = norm.normalize(&raw);
        let (action, lp) = if stochastic {
            policy.sample(&obs, &mut ctx.rng)?
        } else {
            let mu = policy.mean_action(&obs)?;
            let lp = log_prob(&mu, policy.log_std(), &mu);
            (mu, lp)
        };
        let v = value.forward(&obs)?[0];
        let out = env.step(ep, &action);
        ctx.episode_return += out.reward.total;
        seg.raw_obs.extend(raw);
        seg.obs.extend(obs);
        seg.actions.extend(action);
        seg.log_probs.push(lp);
        seg.values.push(v);
        seg.rewards.push(out.reward.total);
        seg.dones.push(out.done);
        if out.done {
            seg.successes += ep.success() as usize;
            seg.divergences += out.diverged as usize;
            seg.returns_done.push(ctx.episode_return);
            ctx.episode = None;
        }
    }
    let tail = match &ctx.episode {
        Some(ep) => value.forward(&norm.normalize(&env.observe(ep)))?[0],
        None => 0.0,
    };
    seg.values.push(tail);
    Ok(seg)
}

/// Result of one evaluation episode.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EvalOutcome {
    pub seed: u64,
    /// `None` when no reachable setup was drawn.
    pub success: Option<bool>,
}

/// Runs one closed-loop episode with `policy` to completion.
pub fn run_policy_episode(env: &GraspEnv, ep: &mut Episode, policy: &dyn ResidualPolicy) {
    while !ep.done() {
        let a = policy.act(&env.observe(ep));
        env.step(ep, &a);
    }
}

/// One episode per seed; the same seed draws the same setup for every policy.
pub fn evaluate(env: &GraspEnv, policy: &dyn ResidualPolicy, seeds: &[u64]) -> Vec<EvalOutcome> {
    seeds
        .par_iter()
        .map(|&seed| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let success = env.start_episode(&mut rng).ok().map(|mut ep| {
                run_policy_episode(env, &mut ep, policy);
                ep.success()
            });
            EvalOutcome { seed, success }
        })
        .collect()
}
