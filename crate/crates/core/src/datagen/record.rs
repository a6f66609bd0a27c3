//! Episode execution with observable recording, projection and replay.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::codec;
use crate::episode::{Episode, EpisodeSetup};
use crate::math::Pose;
use crate::policy::{GraspEnv, ResidualPolicy, MAX_RESAMPLES};
use crate::sim::{observable_obs, CameraSpec, ObservableState, Sim, SimAction, SimState};

/// Observable action: palm twist as commanded plus absolute joint targets.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObservableAction {
    /// `[dx, dy, dz, rx, ry, rz]`, world frame, rotation as axis-angle.
    pub palm_delta: [f64; 6],
    pub joints: Vec<f64>,
}

impl ObservableAction {
    pub fn to_vec(&self) -> Vec<f64> {
        let mut v = self.palm_delta.to_vec();
        v.extend_from_slice(&self.joints);
        v
    }

    pub fn from_slice(v: &[f64]) -> Self {
        let mut palm_delta = [0.0; 6];
        palm_delta.copy_from_slice(&v[..6]);
        Self {
            palm_delta,
            joints: v[6..].to_vec(),
        }
    }

    pub fn to_sim(&self) -> SimAction {
        SimAction {
            delta_palm: self.palm_delta,
            target_joints: self.joints.clone(),
        }
    }
}

/// Maps a simulator state and action to the robot-observable pair.
pub fn project(sim: &Sim, state: &SimState, action: &SimAction, camera: &CameraSpec) -> (ObservableState, ObservableAction) {
    (
        observable_obs(sim, state, camera),
        ObservableAction {
            palm_delta: action.delta_palm,
            joints: action.target_joints.clone(),
        },
    )
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StepRecord {
    #[serde(with = "codec::depth")]
    pub depth: Vec<f32>,
    pub contact_bits: Vec<bool>,
    pub proprio: Vec<f64>,
    pub action: ObservableAction,
}

impl StepRecord {
    pub fn new(obs: ObservableState, action: ObservableAction) -> Self {
        Self {
            depth: obs.depth,
            contact_bits: obs.contact_bits,
            proprio: obs.proprio,
            action,
        }
    }

    pub fn observation(&self) -> ObservableState {
        ObservableState {
            depth: self.depth.clone(),
            contact_bits: self.contact_bits.clone(),
            proprio: self.proprio.clone(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeMeta {
    /// Position in the generation order.
    pub index: u64,
    pub seed: u64,
    /// Setups drawn before this one was reachable.
    pub attempts: usize,
    pub setup: EpisodeSetup,
    /// Object pose after settling on the table.
    pub rest_pose: Pose<f64>,
    pub final_object_pose: Pose<f64>,
    pub success: bool,
    pub slip: f64,
    pub length: usize,
    pub failure: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpisodeRecord {
    pub meta: EpisodeMeta,
    pub steps: Vec<StepRecord>,
}

/// Outcome of one generation slot.
#[derive(Debug, Clone, PartialEq)]
pub enum EpisodeResult {
    Record(EpisodeRecord),
    /// No reachable setup within the resampling budget.
    Skipped { index: u64, seed: u64 },
}

/// Episode seed of slot `index` under a master seed.
pub fn episode_seed(master: u64, index: u64) -> u64 {
    // splitmix64 of the pair.
    let mut z = master ^ index.wrapping_add(1).wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Draws setups from the seed until one is reachable.
pub fn start_seeded(env: &GraspEnv, seed: u64) -> Option<(Episode, usize)> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    for attempt in 1..=MAX_RESAMPLES {
        let setup = env.sampling.sample(&mut rng);
        if let Ok(ep) = env.start_with(setup) {
            return Some((ep, attempt));
        }
    }
    None
}

/// Runs one episode under the residual policy. Observations are rendered
/// afterwards, and only when `render` accepts the finished episode.
pub fn run_episode(
    env: &GraspEnv,
    index: u64,
    seed: u64,
    policy: &dyn ResidualPolicy,
    render: impl Fn(bool) -> bool,
) -> EpisodeResult {
    let Some((mut ep, attempts)) = start_seeded(env, seed) else {
        return EpisodeResult::Skipped { index, seed };
    };
    let rest_pose = ep.state.object_pose;
    let mut trace: Vec<(SimState, SimAction)> = Vec::with_capacity(ep.steps);
    let mut failure = None;
    while !ep.done() {
        let u = policy.act(&env.observe(&ep));
        let residual = env.residual(&u);
        let a = ep.action(&env.sim, &env.skill, &residual);
        let prev = ep.state.clone();
        if let Err(e) = ep.apply(&env.sim, &a) {
            failure = Some(e.to_string());
        }
        trace.push((prev, a));
    }
    let success = ep.success();
    if failure.is_none() && !success {
        failure = Some("success condition not met".into());
    }
    let steps = if render(success) {
        trace
            .iter()
            .map(|(s, a)| {
                let (o, oa) = project(&env.sim, s, a, &ep.setup.camera);
                StepRecord::new(o, oa)
            })
            .collect()
    } else {
        Vec::new()
    };
    EpisodeResult::Record(EpisodeRecord {
        meta: EpisodeMeta {
            index,
            seed,
            attempts,
            setup: ep.setup,
            rest_pose,
            final_object_pose: ep.state.object_pose,
            success,
            slip: ep.state.slip(),
            length: trace.len(),
            failure,
        },
        steps,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ReplayResult {
    pub success: bool,
    pub final_object_pose: Pose<f64>,
    pub diverged: bool,
}

/// Re-executes the recorded observable actions open loop from the recorded setup.
pub fn replay(env: &GraspEnv, record: &EpisodeRecord) -> Result<ReplayResult, crate::episode::EpisodeError> {
    let mut ep = env.start_with(record.meta.setup)?;
    let mut diverged = false;
    for s in &record.steps {
        if ep.apply(&env.sim, &s.action.to_sim()).is_err() {
            diverged = true;
            break;
        }
    }
    Ok(ReplayResult {
        success: !diverged && ep.state.success_latched,
        final_object_pose: ep.state.object_pose,
        diverged,
    })
}
