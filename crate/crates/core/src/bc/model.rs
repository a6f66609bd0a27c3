//! Behavior-cloning network: a depth encoder feeding a trunk together with
//! contact bits, proprioception and the controller clock.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::datagen::ObservableAction;
use crate::math::Quat;
use crate::policy::{Mlp, MlpCache, MlpError, OBS_CLIP};
use crate::scalar::Real;
use crate::sim::ObservableState;
use crate::skill::SkillConfig;

/// Lower bound on normalization variances.
pub const VAR_FLOOR: f64 = 1e-6;

/// Per-dimension affine normalization.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer<T> {
    pub mean: Vec<T>,
    pub std: Vec<T>,
}

impl<T: Real> Normalizer<T> {
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![T::zero(); dim],
            std: vec![T::one(); dim],
        }
    }

    /// Statistics of row-major `rows`, accumulated in `f64`.
    pub fn fit(rows: &[T], dim: usize) -> Self {
        let n = (rows.len() / dim.max(1)).max(1) as f64;
        let mut mean = vec![0.0f64; dim];
        for r in rows.chunks_exact(dim) {
            for (m, x) in mean.iter_mut().zip(r) {
                *m += x.as_f64();
            }
        }
        mean.iter_mut().for_each(|m| *m /= n);
        let mut var = vec![0.0f64; dim];
        for r in rows.chunks_exact(dim) {
            for ((v, x), m) in var.iter_mut().zip(r).zip(&mean) {
                let d = x.as_f64() - m;
                *v += d * d;
            }
        }
        Self {
            mean: mean.iter().map(|m| T::lit(*m)).collect(),
            std: var.iter().map(|v| T::lit((v / n).max(VAR_FLOOR).sqrt())).collect(),
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply(&self, x: &mut [T]) {
        let c = T::lit(OBS_CLIP);
        for (k, v) in x.iter_mut().enumerate() {
            let d = self.dim();
            let j = k % d;
            *v = ((*v - self.mean[j]) / self.std[j]).max(-c).min(c);
        }
    }

    pub fn invert(&self, x: &mut [T]) {
        for (k, v) in x.iter_mut().enumerate() {
            let j = k % self.dim();
            *v = *v * self.std[j] + self.mean[j];
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct BcLayout {
    pub depth: usize,
    pub contacts: usize,
    pub proprio: usize,
    pub action: usize,
    pub encoded: usize,
    /// Control steps per episode; the clock input is `t / steps`.
    pub steps: usize,
}

impl BcLayout {
    /// 32 x 32 depth, four fingers, palm pose plus eight joints.
    pub fn default_hand() -> Self {
        Self {
            depth: 32 * 32,
            contacts: 4,
            proprio: 7 + 8,
            action: 14,
            encoded: 64,
            steps: SkillConfig::default().episode_steps(),
        }
    }

    /// Proprioceptive features: the palm quaternion is expanded to a
    /// rotation matrix.
    pub fn proprio_features(&self) -> usize {
        self.proprio + 5
    }

    pub fn input_dim(&self) -> usize {
        self.depth + self.contacts + self.proprio_features() + 1
    }

    pub fn trunk_input(&self) -> usize {
        self.encoded + self.contacts + self.proprio_features() + 1
    }

    pub fn phase(&self, t: usize) -> f64 {
        t as f64 / self.steps.max(1) as f64
    }

    /// Learning target for a recorded action: joint targets become offsets
    /// from the measured joints, palm deltas pass through.
    pub fn target(&self, proprio: &[f64], action: &[f64]) -> Vec<f64> {
        let mut y = action.to_vec();
        for (a, q) in joint_pairs(proprio, &mut y) {
            *a -= q;
        }
        y
    }

    /// Inverse of [`BcLayout::target`].
    pub fn action(&self, proprio: &[f64], target: &[f64]) -> Vec<f64> {
        let mut y = target.to_vec();
        for (a, q) in joint_pairs(proprio, &mut y) {
            *a += q;
        }
        y
    }
}

/// Joint entries of an action (after the six palm deltas) paired with the
/// measured joints (after the seven palm pose entries).
fn joint_pairs<'a>(proprio: &'a [f64], action: &'a mut [f64]) -> impl Iterator<Item = (&'a mut f64, f64)> + 'a {
    let joints = proprio.get(7..).unwrap_or(&[]);
    action.iter_mut().skip(6).zip(joints.iter().copied())
}

/// Raw feature row `[depth | contact bits | palm position | palm rotation
/// matrix | joints | phase]`. The matrix is continuous in the rotation, unlike
/// the quaternion with its sign ambiguity, and the approach direction is one
/// of its columns.
pub fn features<T: Real>(obs: &ObservableState, phase: f64) -> Vec<T> {
    let p = &obs.proprio;
    let mut out: Vec<T> = Vec::with_capacity(obs.depth.len() + obs.contact_bits.len() + p.len() + 6);
    out.extend(obs.depth.iter().map(|d| T::lit(*d as f64)));
    out.extend(obs.contact_bits.iter().map(|b| if *b { T::one() } else { T::zero() }));
    if p.len() >= 7 {
        out.extend(p[..3].iter().map(|v| T::lit(*v)));
        let q = Quat::from_wxyz(p[3], p[4], p[5], p[6]).canonical();
        out.extend(q.to_matrix().iter().flatten().map(|v| T::lit(*v)));
        out.extend(p[7..].iter().map(|v| T::lit(*v)));
    } else {
        out.extend(p.iter().map(|v| T::lit(*v)));
    }
    out.push(T::lit(phase));
    out
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcPolicy<T> {
    pub layout: BcLayout,
    /// Single tanh layer over the normalized depth block.
    pub encoder: Mlp<T>,
    pub trunk: Mlp<T>,
    pub input_norm: Normalizer<T>,
    pub action_norm: Normalizer<T>,
}

/// Intermediate values of a batched forward pass.
pub struct BcCache<T> {
    pub batch: usize,
    enc: MlpCache<T>,
    encoded: Vec<T>,
    trunk: MlpCache<T>,
}

impl<T> BcCache<T> {
    /// Normalized action predictions, row-major.
    pub fn output(&self) -> &[T] {
        self.trunk.output()
    }
}

impl<T: Real> BcPolicy<T> {
    pub fn init<R: Rng + ?Sized>(layout: BcLayout, hidden: &[usize], rng: &mut R) -> Result<Self, MlpError> {
        let encoder = Mlp::init(&[layout.depth, layout.encoded], 1.0, rng)?;
        let mut sizes = vec![layout.trunk_input()];
        sizes.extend(hidden);
        sizes.push(layout.action);
        let trunk = Mlp::init(&sizes, 1.0, rng)?;
        Ok(Self {
            layout,
            encoder,
            trunk,
            input_norm: Normalizer::identity(layout.input_dim()),
            action_norm: Normalizer::identity(layout.action),
        })
    }

    pub fn param_count(&self) -> usize {
        self.encoder.param_count() + self.trunk.param_count()
    }

    pub fn is_finite(&self) -> bool {
        self.encoder.is_finite() && self.trunk.is_finite()
    }

    /// Forward pass over normalized input rows.
    pub fn forward_batch(&self, x: &[T], batch: usize) -> Result<BcCache<T>, MlpError> {
        let l = self.layout;
        let d = l.input_dim();
        if x.len() != d * batch {
            return Err(MlpError::Input {
                expected: d * batch,
                got: x.len(),
            });
        }
        let mut depth = Vec::with_capacity(batch * l.depth);
        for r in x.chunks_exact(d) {
            depth.extend_from_slice(&r[..l.depth]);
        }
        let enc = self.encoder.forward_batch(&depth, batch)?;
        let encoded: Vec<T> = enc.output().iter().map(|z| z.tanh()).collect();
        let mut trunk_in = Vec::with_capacity(batch * l.trunk_input());
        for (r, e) in x.chunks_exact(d).zip(encoded.chunks_exact(l.encoded)) {
            trunk_in.extend_from_slice(e);
            trunk_in.extend_from_slice(&r[l.depth..]);
        }
        let trunk = self.trunk.forward_batch(&trunk_in, batch)?;
        Ok(BcCache {
            batch,
            enc,
            encoded,
            trunk,
        })
    }

    /// Mean squared error against normalized targets and its gradient,
    /// laid out as `[encoder params | trunk params]`.
    pub fn loss_and_grad(&self, x: &[T], y: &[T], batch: usize) -> Result<(T, Vec<T>), MlpError> {
        let l = self.layout;
        let cache = self.forward_batch(x, batch)?;
        let out = cache.output();
        if y.len() != out.len() {
            return Err(MlpError::OutputGrad {
                expected: out.len(),
                got: y.len(),
            });
        }
        let scale = T::lit(1.0 / out.len() as f64);
        let mut loss = T::zero();
        let mut g_out = Vec::with_capacity(out.len());
        for (o, t) in out.iter().zip(y) {
            let e = *o - *t;
            loss = loss + e * e;
            g_out.push(T::lit(2.0) * e * scale);
        }
        let ne = self.encoder.param_count();
        let mut grad = vec![T::zero(); self.param_count()];
        let g_trunk_in = self.trunk.backward_batch(&cache.trunk, &g_out, &mut grad[ne..])?;
        let ti = l.trunk_input();
        let mut g_enc = Vec::with_capacity(batch * l.encoded);
        for (g, e) in g_trunk_in.chunks_exact(ti).zip(cache.encoded.chunks_exact(l.encoded)) {
            for k in 0..l.encoded {
                g_enc.push(g[k] * (T::one() - e[k] * e[k]));
            }
        }
        self.encoder.backward_params(&cache.enc, &g_enc, &mut grad[..ne])?;
        Ok((loss * scale, grad))
    }

    /// Mean squared error over normalized rows.
    pub fn loss(&self, x: &[T], y: &[T], batch: usize) -> Result<T, MlpError> {
        let cache = self.forward_batch(x, batch)?;
        let out = cache.output();
        let s = out.iter().zip(y).fold(T::zero(), |a, (o, t)| a + (*o - *t) * (*o - *t));
        Ok(s / T::lit(out.len() as f64))
    }

    /// Action for an observation at control step `t`, in physical units.
    pub fn act(&self, obs: &ObservableState, t: usize) -> Result<ObservableAction, MlpError> {
        let mut x = features::<T>(obs, self.layout.phase(t));
        self.input_norm.apply(&mut x);
        let cache = self.forward_batch(&x, 1)?;
        let mut y = cache.output().to_vec();
        self.action_norm.invert(&mut y);
        let v: Vec<f64> = y.iter().map(|t| t.as_f64()).collect();
        Ok(ObservableAction::from_slice(&self.layout.action(&obs.proprio, &v)))
    }

    pub fn params_mut(&mut self) -> (&mut [T], &mut [T]) {
        (self.encoder.params_mut(), self.trunk.params_mut())
    }
}
