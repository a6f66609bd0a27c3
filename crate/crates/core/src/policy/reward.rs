//! Shaped grasp reward: distance progress, contact-force band, pick bonus.

use serde::{Deserialize, Serialize};

use crate::hand::HandModel;
use crate::math::Vec3;
use crate::sim::SimState;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RewardWeights {
    pub w_dist: f64,
    pub w_force: f64,
    pub pick_bonus: f64,
    /// Target fingertip normal-force range (N).
    pub force_band: [f64; 2],
    /// Subtracted on the step where the simulation diverges.
    pub divergence_penalty: f64,
}

impl Default for RewardWeights {
    fn default() -> Self {
        Self {
            w_dist: 1.0,
            w_force: 0.5,
            pick_bonus: 10.0,
            force_band: [0.5, 5.0],
            divergence_penalty: 10.0,
        }
    }
}

impl RewardWeights {
    pub fn validate(&self) -> Result<(), String> {
        let vals = [self.w_dist, self.w_force, self.pick_bonus, self.divergence_penalty];
        if vals.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err("reward weights must be finite and non-negative".into());
        }
        let [lo, hi] = self.force_band;
        if !(lo >= 0.0 && hi > lo && hi.is_finite()) {
            return Err(format!("force band [{lo}, {hi}] must satisfy 0 <= lo < hi"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct RewardBreakdown {
    pub dist: f64,
    pub force: f64,
    pub pick: f64,
    pub total: f64,
}

/// 1 inside `[lo, hi]`, linear down to 0 at 0 N and at `2 hi`.
pub fn force_band(f: f64, [lo, hi]: [f64; 2]) -> f64 {
    if f <= 0.0 || f >= 2.0 * hi {
        0.0
    } else if f < lo {
        f / lo
    } else if f <= hi {
        1.0
    } else {
        (2.0 * hi - f) / hi
    }
}

/// Reward for the transition `prev -> next`. `targets` are fingertip center
/// targets in the object frame; both distances are measured to the targets
/// placed by `next.object_pose`.
pub fn reward(
    hand: &HandModel<f64>,
    prev: &SimState,
    next: &SimState,
    targets: &[Vec3<f64>],
    w: &RewardWeights,
) -> RewardBreakdown {
    let world: Vec<_> = targets.iter().map(|p| next.object_pose.transform_point(*p)).collect();
    let tips_prev = hand.fingertip_positions(&prev.hand);
    let tips_next = hand.fingertip_positions(&next.hand);
    let progress: f64 = world
        .iter()
        .zip(tips_prev.iter().zip(&tips_next))
        .map(|(g, (a, b))| (*a - *g).norm() - (*b - *g).norm())
        .sum();
    let dist = w.w_dist * progress;

    let fingers = next.contacts.len().max(1) as f64;
    let band: f64 = next
        .contacts
        .iter()
        .map(|c| {
            let fn_mag = if c.in_contact { (-c.force.dot(c.normal)).max(0.0) } else { 0.0 };
            force_band(fn_mag, w.force_band)
        })
        .sum();
    let force = w.w_force * band / fingers;

    let pick = if next.success_latched && !prev.success_latched {
        w.pick_bonus
    } else {
        0.0
    };
    RewardBreakdown {
        dist,
        force,
        pick,
        total: dist + force + pick,
    }
}
