//! Generalized advantage estimation.

#[derive(Debug, thiserror::Error, Clone, PartialEq)]
#[error("gae lengths: {rewards} rewards, {values} values, {dones} terminal flags (values needs one more)")]
pub struct GaeLengthError {
    pub rewards: usize,
    pub values: usize,
    pub dones: usize,
}

/// `values` carries one bootstrap value past the last reward. A terminal
/// flag at `t` cuts both the bootstrap and the advantage recursion.
pub fn gae(
    rewards: &[f64],
    values: &[f64],
    dones: &[bool],
    gamma: f64,
    lambda: f64,
) -> Result<(Vec<f64>, Vec<f64>), GaeLengthError> {
    let n = rewards.len();
    if values.len() != n + 1 || dones.len() != n {
        return Err(GaeLengthError {
            rewards: n,
            values: values.len(),
            dones: dones.len(),
        });
    }
    let mut adv = vec![0.0; n];
    let mut acc = 0.0;
    for t in (0..n).rev() {
        let live = if dones[t] { 0.0 } else { 1.0 };
        let delta = rewards[t] + gamma * values[t + 1] * live - values[t];
        acc = delta + gamma * lambda * live * acc;
        adv[t] = acc;
    }
    let ret = adv.iter().zip(values).map(|(a, v)| a + v).collect();
    Ok((adv, ret))
}

/// Shifts and scales to zero mean and unit (population) variance.
pub fn normalize_advantages(adv: &mut [f64]) {
    let n = adv.len();
    if n == 0 {
        return;
    }
    let mean = adv.iter().sum::<f64>() / n as f64;
    let var = adv.iter().map(|a| (a - mean) * (a - mean)).sum::<f64>() / n as f64;
    let std = var.sqrt();
    for a in adv.iter_mut() {
        *a = if std > 1e-12 { (*a - mean) / std } else { *a - mean };
    }
}
