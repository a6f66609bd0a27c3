//! Binary policy checkpoints.
//!
//! Layout, all integers and floats little-endian:
//!
//! ```text
//! "GFPL"  version: u32  n: u32  sizes: n x u32
//! mean-network params: f64 (per layer: weights row-major out x in, then biases)
//! log_std: f64 x out
//! obs-norm: count f64, mean f64 x in, var f64 x in
//! optional trainer trailer:
//!   "GFTR"  update: u64  m: u32  value sizes: m x u32  value params: f64
//!   adam t: u64  adam m: f64 x k  adam v: f64 x k
//! ```

use std::io::{Read, Write};
use std::path::Path;

use super::gaussian::GaussianPolicy;
use super::mlp::{param_count, Mlp, MlpError};
use super::norm::ObsNorm;
use super::ppo::PpoOptimizer;
use super::rollout::TrainedPolicy;
use super::train::TrainState;

pub const MAGIC: &[u8; 4] = b"GFPL";
pub const TRAILER_MAGIC: &[u8; 4] = b"GFTR";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint io: {0}")]
    Io(#[from] std::io::Error),
    #[error("not a policy checkpoint (bad magic)")]
    BadMagic,
    #[error("checkpoint version {0} is not supported (expected {VERSION})")]
    Version(u32),
    #[error("checkpoint is truncated")]
    Truncated,
    #[error("checkpoint has trailing bytes")]
    Trailing,
    #[error("checkpoint has no trainer state")]
    NoTrainerState,
    #[error(transparent)]
    Shape(#[from] MlpError),
}

fn put_u32(out: &mut Vec<u8>, v: u32) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_u64(out: &mut Vec<u8>, v: u64) {
    out.extend_from_slice(&v.to_le_bytes());
}

fn put_f64s(out: &mut Vec<u8>, v: &[f64]) {
    for x in v {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

fn put_sizes(out: &mut Vec<u8>, sizes: &[usize]) {
    put_u32(out, sizes.len() as u32);
    for &s in sizes {
        put_u32(out, s as u32);
    }
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).ok_or(CheckpointError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(CheckpointError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, CheckpointError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn u64(&mut self) -> Result<u64, CheckpointError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn f64s(&mut self, n: usize) -> Result<Vec<f64>, CheckpointError> {
        let bytes = self.take(n.checked_mul(8).ok_or(CheckpointError::Truncated)?)?;
        Ok(bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect())
    }

    fn sizes(&mut self) -> Result<Vec<usize>, CheckpointError> {
        let n = self.u32()? as usize;
        if n > 64 {
            return Err(MlpError::Sizes(vec![]).into());
        }
        (0..n).map(|_| self.u32().map(|s| s as usize)).collect()
    }

    fn done(&self) -> bool {
        self.pos == self.buf.len()
    }
}

fn encode_policy(out: &mut Vec<u8>, p: &TrainedPolicy) {
    out.extend_from_slice(MAGIC);
    put_u32(out, VERSION);
    put_sizes(out, p.policy.mean.sizes());
    put_f64s(out, p.policy.mean.params());
    put_f64s(out, p.policy.log_std());
    put_f64s(out, &[p.norm.count]);
    put_f64s(out, &p.norm.mean);
    put_f64s(out, &p.norm.var);
}

pub fn encode(state: &TrainState) -> Vec<u8> {
    let mut out = Vec::new();
    encode_policy(&mut out, &state.policy);
    out.extend_from_slice(TRAILER_MAGIC);
    put_u64(&mut out, state.update as u64);
    put_sizes(&mut out, state.value.sizes());
    put_f64s(&mut out, state.value.params());
    put_u64(&mut out, state.optimizer.adam.t);
    put_f64s(&mut out, &state.optimizer.adam.m);
    put_f64s(&mut out, &state.optimizer.adam.v);
    out
}

pub fn encode_policy_only(policy: &TrainedPolicy) -> Vec<u8> {
    let mut out = Vec::new();
    encode_policy(&mut out, policy);
    out
}

fn decode_policy(c: &mut Cursor) -> Result<TrainedPolicy, CheckpointError> {
    if c.take(4)? != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let v = c.u32()?;
    if v != VERSION {
        return Err(CheckpointError::Version(v));
    }
    let sizes = c.sizes()?;
    if sizes.len() < 2 {
        return Err(MlpError::Sizes(sizes).into());
    }
    let params = c.f64s(param_count(&sizes))?;
    let mean = Mlp::from_params(&sizes, params)?;
    let log_std = c.f64s(mean.output_dim())?;
    let policy = GaussianPolicy::new(mean, log_std)?;
    let d = sizes[0];
    let count = c.f64s(1)?[0];
    let norm = ObsNorm {
        count,
        mean: c.f64s(d)?,
        var: c.f64s(d)?,
    };
    Ok(TrainedPolicy { policy, norm })
}

/// Reads the policy part, ignoring any trainer trailer.
pub fn decode_policy_bytes(buf: &[u8]) -> Result<TrainedPolicy, CheckpointError> {
    decode_policy(&mut Cursor { buf, pos: 0 })
}

pub fn decode(buf: &[u8], lr: f64) -> Result<TrainState, CheckpointError> {
    let mut c = Cursor { buf, pos: 0 };
    let policy = decode_policy(&mut c)?;
    if c.done() {
        return Err(CheckpointError::NoTrainerState);
    }
    if c.take(4)? != TRAILER_MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    let update = c.u64()? as usize;
    let vs = c.sizes()?;
    if vs.len() < 2 {
        return Err(MlpError::Sizes(vs).into());
    }
    let value = Mlp::from_params(&vs, c.f64s(param_count(&vs))?)?;
    let mut optimizer = PpoOptimizer::new(&policy.policy, &value, lr);
    let k = optimizer.adam.m.len();
    optimizer.adam.t = c.u64()?;
    optimizer.adam.m = c.f64s(k)?;
    optimizer.adam.v = c.f64s(k)?;
    if !c.done() {
        return Err(CheckpointError::Trailing);
    }
    Ok(TrainState {
        policy,
        value,
        optimizer,
        update,
    })
}

pub fn save(path: &Path, state: &TrainState) -> Result<(), CheckpointError> {
    let mut f = std::fs::File::create(path)?;
    f.write_all(&encode(state))?;
    Ok(())
}

pub fn load(path: &Path, lr: f64) -> Result<TrainState, CheckpointError> {
    let mut buf = Vec::new();
    std::fs::File::open(path)?.read_to_end(&mut buf)?;
    decode(&buf, lr)
}

pub fn load_policy(path: &Path) -> Result<TrainedPolicy, CheckpointError> {
    decode_policy_bytes(&std::fs::read(path)?)
}
