//! Minibatch behavior-cloning trainer.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::model::{features, BcLayout, BcPolicy, Normalizer};
use crate::datagen::EpisodeRecord;
use crate::policy::{Adam, MlpError};
use crate::scalar::Real;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct BcConfig {
    pub learning_rate: f64,
    pub epochs: usize,
    pub minibatch: usize,
    /// Trunk hidden layer sizes.
    pub hidden: Vec<usize>,
    /// Width of the depth encoding.
    pub encoded: usize,
}

impl Default for BcConfig {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            epochs: 50,
            minibatch: 128,
            hidden: vec![128, 128],
            encoded: 64,
        }
    }
}

impl BcConfig {
    pub fn validate(&self) -> Result<(), String> {
        if !(self.learning_rate > 0.0) || self.epochs == 0 || self.minibatch == 0 || self.encoded == 0 {
            return Err("bc learning rate, epochs, minibatch and encoding width must be positive".into());
        }
        if self.hidden.iter().any(|&h| h == 0) {
            return Err("bc hidden sizes must be positive".into());
        }
        Ok(())
    }
}

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum BcError {
    #[error("training data is empty")]
    EmptyDataset,
    #[error(transparent)]
    Shape(#[from] MlpError),
    #[error("non-finite loss in epoch {epoch}")]
    NonFinite { epoch: usize },
    #[error("observation does not match the layout: {0}")]
    Layout(String),
}

/// Flattened `(features, action)` pairs in raw units.
#[derive(Debug, Clone, PartialEq)]
pub struct BcData<T> {
    pub layout: BcLayout,
    pub x: Vec<T>,
    pub y: Vec<T>,
    pub episodes: usize,
    /// Shape of every contributing episode.
    pub shapes: Vec<[f64; 5]>,
}

impl<T: Real> BcData<T> {
    pub fn new(layout: BcLayout) -> Self {
        Self {
            layout,
            x: Vec::new(),
            y: Vec::new(),
            episodes: 0,
            shapes: Vec::new(),
        }
    }

    pub fn len(&self) -> usize {
        self.y.len() / self.layout.action.max(1)
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    /// Adds the pair observed at control step `t`.
    pub fn push_pair(&mut self, obs: &crate::sim::ObservableState, t: usize, action: &[f64]) -> Result<(), BcError> {
        let f = features::<T>(obs, self.layout.phase(t));
        if f.len() != self.layout.input_dim() || action.len() != self.layout.action {
            return Err(BcError::Layout(format!(
                "{} features and {} action entries, expected {} and {}",
                f.len(),
                action.len(),
                self.layout.input_dim(),
                self.layout.action
            )));
        }
        self.x.extend(f);
        let y = self.layout.target(&obs.proprio, action);
        self.y.extend(y.iter().map(|a| T::lit(*a)));
        Ok(())
    }

    pub fn push_record(&mut self, rec: &EpisodeRecord) -> Result<(), BcError> {
        for (t, s) in rec.steps.iter().enumerate() {
            self.push_pair(&s.observation(), t, &s.action.to_vec())?;
        }
        self.episodes += 1;
        self.shapes.push(rec.meta.setup.shape.to_array());
        Ok(())
    }

    pub fn extend(&mut self, other: &Self) {
        self.x.extend_from_slice(&other.x);
        self.y.extend_from_slice(&other.y);
        self.episodes += other.episodes;
        self.shapes.extend_from_slice(&other.shapes);
    }

    /// Normalized copies of the listed rows.
    fn gather(&self, policy: &BcPolicy<T>, rows: &[usize]) -> (Vec<T>, Vec<T>) {
        let (d, a) = (self.layout.input_dim(), self.layout.action);
        let mut x = Vec::with_capacity(rows.len() * d);
        let mut y = Vec::with_capacity(rows.len() * a);
        for &i in rows {
            x.extend_from_slice(&self.x[i * d..(i + 1) * d]);
            y.extend_from_slice(&self.y[i * a..(i + 1) * a]);
        }
        policy.input_norm.apply(&mut x);
        policy.action_norm.apply(&mut y);
        (x, y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BcTrainReport {
    /// Mean minibatch loss of every epoch.
    pub epoch_losses: Vec<f64>,
    /// Loss over the whole training set after the last epoch.
    pub final_loss: f64,
    pub samples: usize,
    pub episodes: usize,
}

/// Full-dataset loss in normalized units.
pub fn dataset_loss<T: Real>(policy: &BcPolicy<T>, data: &BcData<T>) -> Result<f64, BcError> {
    let n = data.len();
    let mut total = 0.0;
    let idx: Vec<usize> = (0..n).collect();
    for chunk in idx.chunks(1024) {
        let (x, y) = data.gather(policy, chunk);
        total += policy.loss(&x, &y, chunk.len())?.as_f64() * chunk.len() as f64;
    }
    Ok(total / n.max(1) as f64)
}

/// Fits a fresh policy with Adam on shuffled minibatches.
pub fn train_bc<T: Real>(
    data: &BcData<T>,
    cfg: &BcConfig,
    seed: u64,
    mut on_epoch: impl FnMut(usize, f64),
) -> Result<(BcPolicy<T>, BcTrainReport), BcError> {
    if data.is_empty() {
        return Err(BcError::EmptyDataset);
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut layout = data.layout;
    layout.encoded = cfg.encoded;
    let mut policy = BcPolicy::init(layout, &cfg.hidden, &mut rng)?;
    policy.input_norm = Normalizer::fit(&data.x, layout.input_dim());
    policy.action_norm = Normalizer::fit(&data.y, layout.action);
    let ne = policy.encoder.param_count();
    let mut adam = Adam::<T>::new(policy.param_count(), cfg.learning_rate);
    let n = data.len();
    let mut idx: Vec<usize> = (0..n).collect();
    let mut epoch_losses = Vec::with_capacity(cfg.epochs);
    for epoch in 0..cfg.epochs {
        idx.shuffle(&mut rng);
        let mut sum = 0.0;
        let mut batches = 0usize;
        for chunk in idx.chunks(cfg.minibatch) {
            let (x, y) = data.gather(&policy, chunk);
            let (loss, grad) = policy.loss_and_grad(&x, &y, chunk.len())?;
            let lf = loss.as_f64();
            if !lf.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                return Err(BcError::NonFinite { epoch });
            }
            adam.tick();
            let (enc, trunk) = policy.params_mut();
            adam.update(0, enc, &grad[..ne]);
            adam.update(ne, trunk, &grad[ne..]);
            sum += lf;
            batches += 1;
        }
        let mean = sum / batches as f64;
        epoch_losses.push(mean);
        on_epoch(epoch + 1, mean);
    }
    let final_loss = dataset_loss(&policy, data)?;
    let report = BcTrainReport {
        epoch_losses,
        final_loss,
        samples: n,
        episodes: data.episodes,
    };
    Ok((policy, report))
}
