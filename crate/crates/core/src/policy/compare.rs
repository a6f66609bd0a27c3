//! Paired comparison of two residual policies on shared episode seeds.

use serde::{Deserialize, Serialize};
use statrs::distribution::{Binomial, DiscreteCDF};

use super::rollout::{evaluate, GraspEnv, ResidualPolicy};

/// Outcome counts over seeds where both policies got a reachable setup.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairedComparison {
    pub pairs: usize,
    pub candidate_successes: usize,
    pub baseline_successes: usize,
    /// Candidate succeeded, baseline failed.
    pub wins: usize,
    pub losses: usize,
    /// One-sided exact sign test over the discordant pairs.
    pub p_value: f64,
}

impl PairedComparison {
    pub fn from_pairs(pairs: &[(bool, bool)]) -> Self {
        let wins = pairs.iter().filter(|(c, b)| *c && !*b).count();
        let losses = pairs.iter().filter(|(c, b)| !*c && *b).count();
        Self {
            pairs: pairs.len(),
            candidate_successes: pairs.iter().filter(|p| p.0).count(),
            baseline_successes: pairs.iter().filter(|p| p.1).count(),
            wins,
            losses,
            p_value: sign_test(wins, losses),
        }
    }

    pub fn significant(&self, alpha: f64) -> bool {
        self.candidate_successes > self.baseline_successes && self.p_value < alpha
    }
}

/// `P(X >= wins)` for `X ~ Binomial(wins + losses, 1/2)`; 1 without discordant pairs.
pub fn sign_test(wins: usize, losses: usize) -> f64 {
    let n = (wins + losses) as u64;
    if n == 0 || wins == 0 {
        return 1.0;
    }
    let b = Binomial::new(0.5, n).expect("valid binomial");
    b.sf(wins as u64 - 1)
}

/// Runs both policies on every seed and pairs the outcomes.
pub fn compare(
    env: &GraspEnv,
    candidate: &dyn ResidualPolicy,
    baseline: &dyn ResidualPolicy,
    seeds: &[u64],
) -> PairedComparison {
    let a = evaluate(env, candidate, seeds);
    let b = evaluate(env, baseline, seeds);
    let pairs: Vec<(bool, bool)> = a
        .iter()
        .zip(&b)
        .filter_map(|(x, y)| Some((x.success?, y.success?)))
        .collect();
    PairedComparison::from_pairs(&pairs)
}
