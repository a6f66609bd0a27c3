//! One grasp attempt: reset, hand placed at the pre-grasp pose, reference
//! steps composed with residuals, then the lift-and-hold suffix.

use serde::{Deserialize, Serialize};

use crate::geometry::Superquadric;
use crate::math::{Pose, Vec3};
use crate::sim::{CameraSpec, Sim, SimAction, SimError, SimState};
use crate::skill::{
    compose_action, grasp_pose, pregrasp_pose, GraspPlan, ReferenceTrajectory, SkillConfig, SkillError,
    SkillParam,
};

type V3 = Vec3<f64>;

/// Everything drawn per episode: skill parameter, shape, placement, camera.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EpisodeSetup {
    pub z: SkillParam,
    pub shape: Superquadric<f64>,
    /// Horizontal placement and yaw; the height is set by the table rest.
    pub object_pose: Pose<f64>,
    pub camera: CameraSpec,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum EpisodeError {
    #[error(transparent)]
    Skill(#[from] SkillError),
    #[error(transparent)]
    Sim(#[from] SimError),
}

#[derive(Debug, Clone)]
pub struct Episode {
    pub setup: EpisodeSetup,
    pub plan: GraspPlan,
    pub traj: ReferenceTrajectory,
    pub state: SimState,
    /// Control steps taken so far.
    pub t: usize,
    pub steps: usize,
    pub diverged: bool,
}

impl Episode {
    pub fn start(sim: &Sim, cfg: &SkillConfig, setup: EpisodeSetup) -> Result<Self, EpisodeError> {
        let state = sim.reset(setup.shape, setup.object_pose)?;
        let plan = grasp_pose(&setup.shape, &state.object_pose, &setup.z, &sim.hand, cfg)?;
        let x0 = pregrasp_pose(&plan.pose, &setup.z, &sim.hand, cfg);
        let traj = ReferenceTrajectory::new(x0, plan.pose.clone(), cfg.horizon)?;
        let state = sim.place_hand(&state, &traj.x0);
        Ok(Self {
            setup,
            plan,
            traj,
            state,
            t: 0,
            steps: cfg.episode_steps(),
            diverged: false,
        })
    }

    pub fn done(&self) -> bool {
        self.diverged || self.t >= self.steps
    }

    /// Action for a residual at the current step.
    pub fn action(&self, sim: &Sim, cfg: &SkillConfig, residual: &[f64]) -> SimAction {
        let now = self.traj.episode_reference(self.t, cfg);
        let next = self.traj.episode_reference(self.t + 1, cfg);
        compose_action(&now, &next, residual, &sim.hand, cfg)
    }

    /// Applies an action. Divergence ends the episode and is returned as an error.
    pub fn apply(&mut self, sim: &Sim, action: &SimAction) -> Result<(), SimError> {
        match sim.step(&self.state, action) {
            Ok(s) => {
                self.state = s;
                self.t += 1;
                Ok(())
            }
            Err(e) => {
                self.diverged = true;
                self.t += 1;
                Err(e)
            }
        }
    }

    /// Fingertip center targets in the world, following the object.
    pub fn contact_targets(&self, state: &SimState) -> Vec<V3> {
        self.plan
            .tip_targets
            .iter()
            .map(|p| state.object_pose.transform_point(*p))
            .collect()
    }

    pub fn success(&self) -> bool {
        !self.diverged && self.state.success_latched
    }
}
