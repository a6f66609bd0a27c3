//! Closed-loop evaluation of cloned policies from observable state only.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::model::BcPolicy;
use crate::datagen::{episode_seed, start_seeded, SamplingSpec};
use crate::policy::GraspEnv;
use crate::scalar::Real;
use crate::sim::observable_obs;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalShape {
    pub id: String,
    pub phi: [f64; 5],
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalRow {
    pub phi_id: String,
    pub successes: usize,
    pub trials: usize,
}

impl EvalRow {
    pub fn rate(&self) -> f64 {
        if self.trials == 0 {
            0.0
        } else {
            self.successes as f64 / self.trials as f64
        }
    }
}

pub const EVAL_CSV_HEADER: &str = "phi_id,successes,trials,rate";

pub fn eval_csv(rows: &[EvalRow]) -> String {
    let mut s = String::from(EVAL_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{},{},{},{:.4}\n", r.phi_id, r.successes, r.trials, r.rate()));
    }
    s
}

/// Sum of a set of rows under a new id.
pub fn total(id: &str, rows: &[EvalRow]) -> EvalRow {
    EvalRow {
        phi_id: id.to_string(),
        successes: rows.iter().map(|r| r.successes).sum(),
        trials: rows.iter().map(|r| r.trials).sum(),
    }
}

/// Seed of trial `trial` on shape `shape`; shared by every policy evaluated
/// with the same master seed.
pub fn trial_seed(seed: u64, shape: usize, trial: usize) -> u64 {
    episode_seed(seed ^ 0x5eed_0000_0000_0000, ((shape as u64) << 20) | trial as u64)
}

/// Runs one closed-loop episode. Returns `None` when no reachable start was drawn.
pub fn run_trial<T: Real>(env: &GraspEnv, policy: &BcPolicy<T>, phi: [f64; 5], seed: u64) -> Option<bool> {
    let env = GraspEnv {
        sampling: SamplingSpec {
            fixed_shape: Some(phi),
            ..env.sampling.clone()
        },
        ..env.clone()
    };
    let (mut ep, _) = start_seeded(&env, seed)?;
    while !ep.done() {
        let obs = observable_obs(&env.sim, &ep.state, &ep.setup.camera);
        let Ok(a) = policy.act(&obs, ep.t) else {
            return Some(false);
        };
        if !a.to_vec().iter().all(|v| v.is_finite()) {
            return Some(false);
        }
        if ep.apply(&env.sim, &a.to_sim()).is_err() {
            break;
        }
    }
    Some(ep.success())
}

/// `trials` episodes per shape, run in parallel and reduced in order.
pub fn eval_policy<T: Real>(
    env: &GraspEnv,
    policy: &BcPolicy<T>,
    shapes: &[EvalShape],
    trials: usize,
    seed: u64,
) -> Vec<EvalRow> {
    let jobs: Vec<(usize, usize)> = (0..shapes.len()).flat_map(|s| (0..trials).map(move |t| (s, t))).collect();
    let results: Vec<Option<bool>> = jobs
        .par_iter()
        .map(|&(s, t)| run_trial(env, policy, shapes[s].phi, trial_seed(seed, s, t)))
        .collect();
    shapes
        .iter()
        .enumerate()
        .map(|(s, shape)| {
            let rs = &results[s * trials..(s + 1) * trials];
            let skipped = rs.iter().filter(|r| r.is_none()).count();
            if skipped > 0 {
                log::warn!("{}: {skipped} trials had no reachable start and count as failures", shape.id);
            }
            EvalRow {
                phi_id: shape.id.clone(),
                successes: rs.iter().filter(|r| **r == Some(true)).count(),
                trials,
            }
        })
        .collect()
}

/// Plain-text table with one column per policy.
pub fn format_table(columns: &[(&str, &[EvalRow])]) -> String {
    let mut s = format!("{:<16}", "object");
    for (name, _) in columns {
        s.push_str(&format!("{:>18}", name));
    }
    s.push('\n');
    let n = columns.first().map(|c| c.1.len()).unwrap_or(0);
    for i in 0..n {
        s.push_str(&format!("{:<16}", columns[0].1[i].phi_id));
        for (_, rows) in columns {
            let r = &rows[i];
            s.push_str(&format!(
                "{:>18}",
                format!("{}/{} ({:.0}%)", r.successes, r.trials, 100.0 * r.rate())
            ));
        }
        s.push('\n');
    }
    s
}
