//! Clipped-surrogate policy optimization with an Adam optimizer.

use rand::seq::SliceRandom;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::gaussian::{log_prob, GaussianPolicy};
use super::mlp::{Mlp, MlpError};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PpoConfig {
    pub gamma: f64,
    pub lambda: f64,
    pub clip: f64,
    pub epochs_per_update: usize,
    pub minibatch: usize,
    /// Environment steps per update, summed over all contexts.
    pub rollout_steps: usize,
    pub learning_rate: f64,
    pub value_coeff: f64,
    pub entropy_coeff: f64,
    pub max_grad_norm: f64,
    pub total_updates: usize,
    /// Parallel episode contexts sharing the rollout budget.
    pub contexts: usize,
    pub hidden: Vec<usize>,
    /// Initial log standard deviation of the joint dimensions.
    pub init_log_std: f64,
    /// Initial log standard deviation of the six palm dimensions, whose
    /// residuals accumulate over the episode.
    pub init_log_std_palm: f64,
}

impl Default for PpoConfig {
    fn default() -> Self {
        Self {
            gamma: 0.99,
            lambda: 0.95,
            clip: 0.2,
            epochs_per_update: 4,
            minibatch: 256,
            rollout_steps: 2048,
            learning_rate: 5e-5,
            value_coeff: 0.5,
            entropy_coeff: 0.01,
            max_grad_norm: 0.5,
            total_updates: 150,
            contexts: 8,
            hidden: vec![128, 128],
            init_log_std: -1.0,
            init_log_std_palm: -3.0,
        }
    }
}

impl PpoConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.gamma > 0.0 && self.gamma <= 1.0) || !(self.lambda > 0.0 && self.lambda <= 1.0) {
            return Err(format!("gamma {} and lambda {} must lie in (0, 1]", self.gamma, self.lambda));
        }
        if !(self.clip > 0.0) {
            return Err(format!("clip {} must be positive", self.clip));
        }
        if self.epochs_per_update == 0 || self.minibatch == 0 || self.rollout_steps == 0 || self.contexts == 0 {
            return Err("epochs, minibatch, rollout_steps and contexts must be positive".into());
        }
        if !(self.learning_rate > 0.0) || !(self.max_grad_norm > 0.0) {
            return Err("learning rate and gradient norm bound must be positive".into());
        }
        if self.value_coeff < 0.0 || self.entropy_coeff < 0.0 {
            return Err("loss coefficients must be non-negative".into());
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err("hidden layer sizes must be positive".into());
        }
        Ok(())
    }

    /// Layer sizes of the policy mean network.
    pub fn policy_sizes(&self, obs_dim: usize, act_dim: usize) -> Vec<usize> {
        let mut s = vec![obs_dim];
        s.extend(&self.hidden);
        s.push(act_dim);
        s
    }
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct Adam<T> {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub t: u64,
    pub m: Vec<T>,
    pub v: Vec<T>,
}

impl<T: Real> Adam<T> {
    pub fn new(n: usize, lr: f64) -> Self {
        Self {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            t: 0,
            m: vec![T::zero(); n],
            v: vec![T::zero(); n],
        }
    }

    /// Advances the step counter; call once before the `update`s of a step.
    pub fn tick(&mut self) {
        self.t += 1;
    }

    /// Updates `params` whose moments start at `offset`.
    pub fn update(&mut self, offset: usize, params: &mut [T], grads: &[T]) {
        let (b1, b2) = (T::lit(self.beta1), T::lit(self.beta2));
        let c1 = T::lit(1.0 - self.beta1.powi(self.t as i32));
        let c2 = T::lit(1.0 - self.beta2.powi(self.t as i32));
        let lr = T::lit(self.lr);
        let eps = T::lit(self.eps);
        let m = &mut self.m[offset..offset + params.len()];
        let v = &mut self.v[offset..offset + params.len()];
        for k in 0..params.len() {
            let g = grads[k];
            m[k] = b1 * m[k] + (T::one() - b1) * g;
            v[k] = b2 * v[k] + (T::one() - b2) * g * g;
            let mh = m[k] / c1;
            let vh = v[k] / c2;
            params[k] = params[k] - lr * mh / (vh.sqrt() + eps);
        }
    }
}

/// Flattened training batch. `obs` rows are already normalized.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Batch {
    pub obs_dim: usize,
    pub act_dim: usize,
    pub obs: Vec<f64>,
    pub actions: Vec<f64>,
    pub log_probs: Vec<f64>,
    pub advantages: Vec<f64>,
    pub returns: Vec<f64>,
}

impl Batch {
    pub fn len(&self) -> usize {
        self.log_probs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.log_probs.is_empty()
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct UpdateMetrics {
    pub policy_loss: f64,
    pub value_loss: f64,
    pub entropy: f64,
    pub mean_ratio: f64,
    pub clip_fraction: f64,
    pub approx_kl: f64,
    pub grad_norm: f64,
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum PpoError {
    #[error("non-finite loss in epoch {epoch}, minibatch {minibatch}")]
    NonFinite { epoch: usize, minibatch: usize },
    #[error(transparent)]
    Shape(#[from] MlpError),
    #[error("empty batch")]
    EmptyBatch,
}

/// Clipped surrogate `min(rho A, clip(rho, 1-eps, 1+eps) A)` and whether the
/// unclipped branch carries the gradient.
pub fn clipped_objective(ratio: f64, adv: f64, eps: f64) -> (f64, bool) {
    let unclipped = ratio * adv;
    let clipped = ratio.clamp(1.0 - eps, 1.0 + eps) * adv;
    if unclipped <= clipped {
        (unclipped, true)
    } else {
        (clipped, false)
    }
}

/// Optimizer state over the concatenation `[policy mean, log_std, value]`.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PpoOptimizer {
    pub adam: Adam<f64>,
}

impl PpoOptimizer {
    pub fn new(policy: &GaussianPolicy, value: &Mlp<f64>, lr: f64) -> Self {
        let n = policy.mean.param_count() + policy.action_dim() + value.param_count();
        Self { adam: Adam::new(n, lr) }
    }
}

/// Runs the configured epochs of minibatch updates over `batch`.
pub fn ppo_update<R: Rng + ?Sized>(
    policy: &mut GaussianPolicy,
    value: &mut Mlp<f64>,
    opt: &mut PpoOptimizer,
    batch: &Batch,
    cfg: &PpoConfig,
    rng: &mut R,
) -> Result<UpdateMetrics, PpoError> {
    let n = batch.len();
    if n == 0 {
        return Err(PpoError::EmptyBatch);
    }
    let (od, ad) = (batch.obs_dim, batch.act_dim);
    let np = policy.mean.param_count();
    let nv = value.param_count();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut sums = UpdateMetrics::default();
    let mut count = 0usize;
    for epoch in 0..cfg.epochs_per_update {
        idx.shuffle(rng);
        for (mb_i, chunk) in idx.chunks(cfg.minibatch.max(1)).enumerate() {
            let m = chunk.len();
            let mf = m as f64;
            let mut obs = Vec::with_capacity(m * od);
            for &i in chunk {
                obs.extend_from_slice(&batch.obs[i * od..(i + 1) * od]);
            }
            let pc = policy.mean.forward_batch(&obs, m)?;
            let vc = value.forward_batch(&obs, m)?;
            let mu = pc.output();
            let vs = vc.output();
            let log_std = policy.log_std().to_vec();
            let inv_var: Vec<f64> = log_std.iter().map(|s| (-2.0 * s).exp()).collect();

            let mut g_mu = vec![0.0; m * ad];
            let mut g_ls = vec![0.0; ad];
            let mut g_v = vec![0.0; m];
            let (mut surr, mut vloss, mut ratio_sum, mut clipped, mut kl) = (0.0, 0.0, 0.0, 0usize, 0.0);
            for (r, &i) in chunk.iter().enumerate() {
                let a = &batch.actions[i * ad..(i + 1) * ad];
                let mu_r = &mu[r * ad..(r + 1) * ad];
                let lp = log_prob(mu_r, &log_std, a);
                let ratio = (lp - batch.log_probs[i]).exp();
                let adv = batch.advantages[i];
                let (obj, grad_on) = clipped_objective(ratio, adv, cfg.clip);
                surr += obj;
                ratio_sum += ratio;
                kl += batch.log_probs[i] - lp;
                if (ratio - 1.0).abs() > cfg.clip {
                    clipped += 1;
                }
                if grad_on {
                    // d(-obj/m)/dlogp = -ratio * adv / m.
                    let c = -ratio * adv / mf;
                    for j in 0..ad {
                        let d = a[j] - mu_r[j];
                        g_mu[r * ad + j] += c * d * inv_var[j];
                        g_ls[j] += c * (d * d * inv_var[j] - 1.0);
                    }
                }
                let e = vs[r] - batch.returns[i];
                vloss += e * e;
                g_v[r] = cfg.value_coeff * 2.0 * e / mf;
            }
            let entropy = policy.entropy();
            let loss = -surr / mf + cfg.value_coeff * vloss / mf - cfg.entropy_coeff * entropy;
            if !loss.is_finite() {
                return Err(PpoError::NonFinite { epoch, minibatch: mb_i });
            }
            for g in &mut g_ls {
                *g -= cfg.entropy_coeff;
            }
            let mut grad_p = vec![0.0; np];
            policy.mean.backward_batch(&pc, &g_mu, &mut grad_p)?;
            let mut grad_v = vec![0.0; nv];
            value.backward_batch(&vc, &g_v, &mut grad_v)?;

            let norm = grad_p
                .iter()
                .chain(&g_ls)
                .chain(&grad_v)
                .map(|g| g * g)
                .sum::<f64>()
                .sqrt();
            if !norm.is_finite() {
                return Err(PpoError::NonFinite { epoch, minibatch: mb_i });
            }
            if norm > cfg.max_grad_norm {
                let s = cfg.max_grad_norm / norm;
                grad_p.iter_mut().chain(g_ls.iter_mut()).chain(grad_v.iter_mut()).for_each(|g| *g *= s);
            }
            opt.adam.tick();
            opt.adam.update(0, policy.mean.params_mut(), &grad_p);
            opt.adam.update(np, policy.log_std_mut(), &g_ls);
            opt.adam.update(np + ad, value.params_mut(), &grad_v);
            policy.clamp_log_std();

            sums.policy_loss += -surr / mf;
            sums.value_loss += vloss / mf;
            sums.entropy += entropy;
            sums.mean_ratio += ratio_sum / mf;
            sums.clip_fraction += clipped as f64 / mf;
            sums.approx_kl += kl / mf;
            sums.grad_norm += norm;
            count += 1;
        }
    }
    let c = count.max(1) as f64;
    Ok(UpdateMetrics {
        policy_loss: sums.policy_loss / c,
        value_loss: sums.value_loss / c,
        entropy: sums.entropy / c,
        mean_ratio: sums.mean_ratio / c,
        clip_fraction: sums.clip_fraction / c,
        approx_kl: sums.approx_kl / c,
        grad_norm: sums.grad_norm / c,
    })
}
