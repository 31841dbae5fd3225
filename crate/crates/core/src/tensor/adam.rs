use serde::{Deserialize, Serialize};

use super::{Scalar, Tensor};
use crate::error::{dim_err, Result};

/// Adam hyperparameters. Defaults: lr 0.001, betas (0.9, 0.999), eps 1e-8.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 0.001, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First and second moment estimates for an ordered parameter list.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState<T = f32> {
    pub config: AdamConfig,
    pub step: u64,
    pub m: Vec<Vec<T>>,
    pub v: Vec<Vec<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(config: AdamConfig) -> Self {
        AdamState { config, step: 0, m: Vec::new(), v: Vec::new() }
    }
}

/// One bias-corrected Adam update. Reads each parameter's gradient slot (an
/// absent slot counts as zero) and increments `state.step` by one.
pub fn adam_step<T: Scalar>(params: &mut [&mut Tensor<T>], state: &mut AdamState<T>) -> Result<()> {
    if state.m.is_empty() && state.step == 0 {
        state.m = params.iter().map(|p| vec![T::zero(); p.len()]).collect();
        state.v = state.m.clone();
    }
    if state.m.len() != params.len() {
        return dim_err(format!(
            "optimizer tracks {} parameters, got {}",
            state.m.len(),
            params.len()
        ));
    }
    for (i, p) in params.iter().enumerate() {
        if state.m[i].len() != p.len() || state.v[i].len() != p.len() {
            return dim_err(format!(
                "parameter {i} has {} values, optimizer moments have {}",
                p.len(),
                state.m[i].len()
            ));
        }
    }

    state.step += 1;
    let c = state.config;
    let t = state.step as i32;
    let beta1 = T::from_f64_lossy(c.beta1);
    let beta2 = T::from_f64_lossy(c.beta2);
    let one = T::one();
    let correction1 = T::from_f64_lossy(1.0 - c.beta1.powi(t));
    let correction2 = T::from_f64_lossy(1.0 - c.beta2.powi(t));
    let lr = T::from_f64_lossy(c.lr);
    let eps = T::from_f64_lossy(c.eps);

    for (i, p) in params.iter_mut().enumerate() {
        let grad = p.grad().map(|g| g.to_vec());
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (j, theta) in p.data_mut().iter_mut().enumerate() {
            let g = grad.as_ref().map_or(T::zero(), |g| g[j]);
            m[j] = beta1 * m[j] + (one - beta1) * g;
            v[j] = beta2 * v[j] + (one - beta2) * g * g;
            let m_hat = m[j] / correction1;
            let v_hat = v[j] / correction2;
            *theta -= lr * m_hat / (v_hat.sqrt() + eps);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn zero_gradient_is_a_no_op() {
        let mut p = Tensor::<f64>::from_fn(&[5], |i| i as f64 - 2.0);
        let before = p.clone();
        p.grad_mut();
        let mut state = AdamState::new(AdamConfig::default());
        for _ in 0..50 {
            adam_step(&mut [&mut p], &mut state).unwrap();
        }
        assert_eq!(p.data(), before.data());
        assert_eq!(state.step, 50);
    }

    #[test]
    fn first_step_moves_by_lr() {
        for g in [1e-3, -0.5, 42.0] {
            let mut p = Tensor::<f64>::full(&[1], 3.0);
            p.accumulate_grad(&[g]);
            let mut state = AdamState::new(AdamConfig { eps: 0.0, ..AdamConfig::default() });
            adam_step(&mut [&mut p], &mut state).unwrap();
            assert!(((p.data()[0] - 3.0).abs() - 0.001).abs() < 1e-15);
        }
    }

    #[test]
    fn shape_mismatch_is_reported() {
        let mut a = Tensor::<f32>::zeros(&[3]);
        let mut state = AdamState::new(AdamConfig::default());
        adam_step(&mut [&mut a], &mut state).unwrap();
        let mut b = Tensor::<f32>::zeros(&[4]);
        assert!(adam_step(&mut [&mut b], &mut state).is_err());
    }
}
