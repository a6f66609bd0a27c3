//! Dense tanh network with flat parameters and hand-written reverse mode.
//!
//! Parameters are stored layer by layer: the weight matrix in row-major
//! `out x in` order followed by the bias vector of that layer.

use rand::Rng;
use rand_distr::{Distribution, StandardNormal};
use serde::{Deserialize, Serialize};

use crate::scalar::Real;

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
pub enum MlpError {
    #[error("input has {got} entries, expected {expected}")]
    Input { expected: usize, got: usize },
    #[error("output gradient has {got} entries, expected {expected}")]
    OutputGrad { expected: usize, got: usize },
    #[error("parameter vector has {got} entries, expected {expected}")]
    Params { expected: usize, got: usize },
    #[error("an MLP needs at least two positive layer sizes, got {0:?}")]
    Sizes(Vec<usize>),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mlp<T> {
    sizes: Vec<usize>,
    params: Vec<T>,
}

/// Activations of a batched forward pass, kept for the backward pass.
#[derive(Debug, Clone)]
pub struct MlpCache<T> {
    pub batch: usize,
    /// `acts[0]` is the input, `acts[l]` the output of layer `l`.
    pub acts: Vec<Vec<T>>,
}

impl<T> MlpCache<T> {
    pub fn output(&self) -> &[T] {
        self.acts.last().map(|v| v.as_slice()).unwrap_or(&[])
    }
}

pub fn param_count(sizes: &[usize]) -> usize {
    sizes.windows(2).map(|w| w[0] * w[1] + w[1]).sum()
}

fn check_sizes(sizes: &[usize]) -> Result<(), MlpError> {
    if sizes.len() < 2 || sizes.iter().any(|&s| s == 0) {
        return Err(MlpError::Sizes(sizes.to_vec()));
    }
    Ok(())
}

#[inline]
fn dot<T: Real>(a: &[T], b: &[T]) -> T {
    let mut acc = [T::zero(); 8];
    let mut ca = a.chunks_exact(8);
    let mut cb = b.chunks_exact(8);
    for (x, y) in (&mut ca).zip(&mut cb) {
        for k in 0..8 {
            acc[k] = acc[k] + x[k] * y[k];
        }
    }
    let mut s = T::zero();
    for (x, y) in ca.remainder().iter().zip(cb.remainder()) {
        s = s + *x * *y;
    }
    ((acc[0] + acc[4]) + (acc[1] + acc[5])) + ((acc[2] + acc[6]) + (acc[3] + acc[7])) + s
}

#[inline]
fn axpy<T: Real>(y: &mut [T], alpha: T, x: &[T]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = *yi + alpha * *xi;
    }
}

impl<T: Real> Mlp<T> {
    pub fn zeros(sizes: &[usize]) -> Result<Self, MlpError> {
        check_sizes(sizes)?;
        Ok(Self {
            sizes: sizes.to_vec(),
            params: vec![T::zero(); param_count(sizes)],
        })
    }

    pub fn from_params(sizes: &[usize], params: Vec<T>) -> Result<Self, MlpError> {
        check_sizes(sizes)?;
        let expected = param_count(sizes);
        if params.len() != expected {
            return Err(MlpError::Params {
                expected,
                got: params.len(),
            });
        }
        Ok(Self {
            sizes: sizes.to_vec(),
            params,
        })
    }

    /// Weights drawn from `N(0, 1/fan_in)`, zero biases. The last layer's
    /// weights are multiplied by `output_gain`.
    pub fn init<R: Rng + ?Sized>(sizes: &[usize], output_gain: f64, rng: &mut R) -> Result<Self, MlpError> {
        let mut net = Self::zeros(sizes)?;
        let layers = net.layer_count();
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (sizes[l], sizes[l + 1]);
            let mut scale = (1.0 / n_in as f64).sqrt();
            if l + 1 == layers {
                scale *= output_gain;
            }
            for w in &mut net.params[off..off + n_in * n_out] {
                let z: f64 = StandardNormal.sample(rng);
                *w = T::lit(z * scale);
            }
            off += n_in * n_out + n_out;
        }
        Ok(net)
    }

    pub fn sizes(&self) -> &[usize] {
        &self.sizes
    }

    pub fn layer_count(&self) -> usize {
        self.sizes.len() - 1
    }

    pub fn input_dim(&self) -> usize {
        self.sizes[0]
    }

    pub fn output_dim(&self) -> usize {
        self.sizes[self.sizes.len() - 1]
    }

    pub fn params(&self) -> &[T] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [T] {
        &mut self.params
    }

    pub fn param_count(&self) -> usize {
        self.params.len()
    }

    pub fn is_finite(&self) -> bool {
        self.params.iter().all(|p| p.is_finite())
    }

    /// Offsets of the weight block and bias block of layer `l`.
    fn layer_offsets(&self, l: usize) -> (usize, usize) {
        let off: usize = self.sizes[..l + 1]
            .windows(2)
            .map(|w| w[0] * w[1] + w[1])
            .sum();
        (off, off + self.sizes[l] * self.sizes[l + 1])
    }

    pub fn forward(&self, input: &[T]) -> Result<Vec<T>, MlpError> {
        let mut cache = self.forward_batch(input, 1)?;
        Ok(cache.acts.pop().unwrap_or_default())
    }

    /// Forward pass over `batch` inputs stored row by row.
    pub fn forward_batch(&self, inputs: &[T], batch: usize) -> Result<MlpCache<T>, MlpError> {
        let n_in = self.input_dim();
        if inputs.len() != n_in * batch {
            return Err(MlpError::Input {
                expected: n_in * batch,
                got: inputs.len(),
            });
        }
        let layers = self.layer_count();
        let mut acts = Vec::with_capacity(layers + 1);
        acts.push(inputs.to_vec());
        let mut off = 0;
        for l in 0..layers {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let w = &self.params[off..off + n_in * n_out];
            let b = &self.params[off + n_in * n_out..off + n_in * n_out + n_out];
            let x = &acts[l];
            let mut y = vec![T::zero(); batch * n_out];
            let hidden = l + 1 < layers;
            for i in 0..batch {
                let xi = &x[i * n_in..(i + 1) * n_in];
                for (o, yo) in y[i * n_out..(i + 1) * n_out].iter_mut().enumerate() {
                    let z = dot(&w[o * n_in..(o + 1) * n_in], xi) + b[o];
                    *yo = if hidden { z.tanh() } else { z };
                }
            }
            acts.push(y);
            off += n_in * n_out + n_out;
        }
        Ok(MlpCache { batch, acts })
    }

    /// Accumulates parameter gradients into `grad` and returns the input
    /// gradient for a cached batch, given the gradient of the output rows.
    pub fn backward_batch(&self, cache: &MlpCache<T>, out_grad: &[T], grad: &mut [T]) -> Result<Vec<T>, MlpError> {
        self.backward_impl(cache, out_grad, grad, true)
    }

    /// As [`Mlp::backward_batch`] without forming the input gradient.
    pub fn backward_params(&self, cache: &MlpCache<T>, out_grad: &[T], grad: &mut [T]) -> Result<(), MlpError> {
        self.backward_impl(cache, out_grad, grad, false).map(|_| ())
    }

    fn backward_impl(&self, cache: &MlpCache<T>, out_grad: &[T], grad: &mut [T], input_grad: bool) -> Result<Vec<T>, MlpError> {
        let batch = cache.batch;
        let expected = self.output_dim() * batch;
        if out_grad.len() != expected {
            return Err(MlpError::OutputGrad {
                expected,
                got: out_grad.len(),
            });
        }
        if grad.len() != self.params.len() {
            return Err(MlpError::Params {
                expected: self.params.len(),
                got: grad.len(),
            });
        }
        let layers = self.layer_count();
        let mut delta = out_grad.to_vec();
        for l in (0..layers).rev() {
            let (n_in, n_out) = (self.sizes[l], self.sizes[l + 1]);
            let (wo, bo) = self.layer_offsets(l);
            if l + 1 < layers {
                // Through tanh: dz = dy * (1 - y^2).
                for (d, y) in delta.iter_mut().zip(&cache.acts[l + 1]) {
                    *d = *d * (T::one() - *y * *y);
                }
            }
            let x = &cache.acts[l];
            {
                let (gw, gb) = grad[wo..bo + n_out].split_at_mut(n_in * n_out);
                for i in 0..batch {
                    let xi = &x[i * n_in..(i + 1) * n_in];
                    for o in 0..n_out {
                        let d = delta[i * n_out + o];
                        if d != T::zero() {
                            axpy(&mut gw[o * n_in..(o + 1) * n_in], d, xi);
                        }
                        gb[o] = gb[o] + d;
                    }
                }
            }
            if l == 0 && !input_grad {
                return Ok(Vec::new());
            }
            let w = &self.params[wo..bo];
            let mut dx = vec![T::zero(); batch * n_in];
            for i in 0..batch {
                let row = &mut dx[i * n_in..(i + 1) * n_in];
                for o in 0..n_out {
                    let d = delta[i * n_out + o];
                    if d != T::zero() {
                        axpy(row, d, &w[o * n_in..(o + 1) * n_in]);
                    }
                }
            }
            delta = dx;
        }
        Ok(delta)
    }

    /// Parameter and input gradients of `output_grad . f(input)`.
    pub fn backward(&self, input: &[T], output_grad: &[T]) -> Result<(Vec<T>, Vec<T>), MlpError> {
        let cache = self.forward_batch(input, 1)?;
        let mut grad = vec![T::zero(); self.params.len()];
        let gx = self.backward_batch(&cache, output_grad, &mut grad)?;
        Ok((grad, gx))
    }

    pub fn cast<U: Real>(&self) -> Mlp<U> {
        Mlp {
            sizes: self.sizes.clone(),
            params: self.params.iter().map(|p| U::lit(p.as_f64())).collect(),
        }
    }
}
