//! Diagonal Gaussian policy over normalized residual actions.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use super::mlp::{Mlp, MlpError};

pub const LOG_STD_MIN: f64 = -5.0;
pub const LOG_STD_MAX: f64 = 0.0;

const HALF_LOG_2PI: f64 = 0.918_938_533_204_672_7;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GaussianPolicy {
    pub mean: Mlp<f64>,
    log_std: Vec<f64>,
}

impl GaussianPolicy {
    pub fn new(mean: Mlp<f64>, log_std: Vec<f64>) -> Result<Self, MlpError> {
        if log_std.len() != mean.output_dim() {
            return Err(MlpError::Params {
                expected: mean.output_dim(),
                got: log_std.len(),
            });
        }
        let mut p = Self { mean, log_std };
        p.clamp_log_std();
        Ok(p)
    }

    /// Small output layer so the initial mean residual is close to zero.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], log_std: f64, rng: &mut R) -> Result<Self, MlpError> {
        let mean = Mlp::init(sizes, 0.01, rng)?;
        let n = mean.output_dim();
        Self::new(mean, vec![log_std; n])
    }

    pub fn action_dim(&self) -> usize {
        self.log_std.len()
    }

    pub fn log_std(&self) -> &[f64] {
        &self.log_std
    }

    pub fn log_std_mut(&mut self) -> &mut [f64] {
        &mut self.log_std
    }

    pub fn clamp_log_std(&mut self) {
        for s in &mut self.log_std {
            *s = s.clamp(LOG_STD_MIN, LOG_STD_MAX);
        }
    }

    pub fn mean_action(&self, obs: &[f64]) -> Result<Vec<f64>, MlpError> {
        self.mean.forward(obs)
    }

    /// Draws an action and returns it with its log-density.
    pub fn sample<R: Rng + ?Sized>(&self, obs: &[f64], rng: &mut R) -> Result<(Vec<f64>, f64), MlpError> {
        let mu = self.mean.forward(obs)?;
        let action: Vec<f64> = mu
            .iter()
            .zip(&self.log_std)
            .map(|(m, s)| {
                let z: f64 = StandardNormal.sample(rng);
                m + s.exp() * z
            })
            .collect();
        let lp = log_prob(&mu, &self.log_std, &action);
        Ok((action, lp))
    }

    pub fn entropy(&self) -> f64 {
        entropy(&self.log_std)
    }
}

pub fn log_prob(mean: &[f64], log_std: &[f64], action: &[f64]) -> f64 {
    mean.iter()
        .zip(log_std)
        .zip(action)
        .map(|((m, s), a)| {
            let z = (a - m) / s.exp();
            -0.5 * z * z - s - HALF_LOG_2PI
        })
        .sum()
}

pub fn entropy(log_std: &[f64]) -> f64 {
    log_std.iter().map(|s| s + 0.5 + HALF_LOG_2PI).sum()
}
