//! Running mean and variance for observation normalization.

use serde::{Deserialize, Serialize};

const VAR_EPS: f64 = 1e-8;
pub const OBS_CLIP: f64 = 10.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ObsNorm {
    pub count: f64,
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl ObsNorm {
    /// Identity statistics with a tiny prior count.
    pub fn new(dim: usize) -> Self {
        Self {
            count: 1e-4,
            mean: vec![0.0; dim],
            var: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    /// Merges the statistics of `rows` (row-major, `dim` columns).
    pub fn update(&mut self, rows: &[f64]) {
        let d = self.dim();
        if d == 0 || rows.is_empty() {
            return;
        }
        let n = (rows.len() / d) as f64;
        let mut bm = vec![0.0; d];
        for r in rows.chunks_exact(d) {
            for (m, x) in bm.iter_mut().zip(r) {
                *m += x;
            }
        }
        bm.iter_mut().for_each(|m| *m /= n);
        let mut bv = vec![0.0; d];
        for r in rows.chunks_exact(d) {
            for ((v, x), m) in bv.iter_mut().zip(r).zip(&bm) {
                *v += (x - m) * (x - m);
            }
        }
        bv.iter_mut().for_each(|v| *v /= n);
        let total = self.count + n;
        for k in 0..d {
            let delta = bm[k] - self.mean[k];
            let m2 = self.var[k] * self.count + bv[k] * n + delta * delta * self.count * n / total;
            self.mean[k] += delta * n / total;
            self.var[k] = m2 / total;
        }
        self.count = total;
    }

    pub fn normalize(&self, x: &[f64]) -> Vec<f64> {
        x.iter()
            .zip(&self.mean)
            .zip(&self.var)
            .map(|((x, m), v)| ((x - m) / (v + VAR_EPS).sqrt()).clamp(-OBS_CLIP, OBS_CLIP))
            .collect()
    }
}
