//! Residual policy: network, reward, advantage estimation, PPO training.

pub mod checkpoint;
mod compare;
mod gae;
mod gaussian;
mod mlp;
mod norm;
mod ppo;
mod reward;
mod rollout;
mod train;

pub use compare::{compare, sign_test, PairedComparison};
pub use gae::{gae, normalize_advantages, GaeLengthError};
pub use gaussian::{entropy, log_prob, GaussianPolicy, LOG_STD_MAX, LOG_STD_MIN};
pub use mlp::{param_count, Mlp, MlpCache, MlpError};
pub use norm::{ObsNorm, OBS_CLIP};
pub use ppo::{clipped_objective, ppo_update, Adam, Batch, PpoConfig, PpoError, PpoOptimizer, UpdateMetrics};
pub use reward::{force_band, reward, RewardBreakdown, RewardWeights};
pub use rollout::{
    collect_rollouts, evaluate, run_policy_episode, EnvContext, EvalOutcome, GraspEnv, ResidualPolicy, Rollout,
    RolloutError, RolloutStats, StepOutcome, TrainedPolicy, ZeroResidual, MAX_RESAMPLES,
};
pub use train::{append_metrics, train, train_update, TrainError, TrainState, UpdateRecord, METRICS_HEADER};
