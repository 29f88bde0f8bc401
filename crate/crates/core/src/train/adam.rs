use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::params::Params;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First and second moments, one buffer per parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

impl AdamState {
    pub fn new<P: Params>(params: &P) -> Self {
        let zeros: Vec<Vec<f64>> = params.params().iter().map(|(_, p)| vec![0.0; p.len()]).collect();
        Self {
            m: zeros.clone(),
            v: zeros,
            step: 0,
        }
    }
}

/// One bias-corrected Adam update. A non-finite gradient aborts the step
/// before anything is modified.
pub fn adam_step<P: Params>(params: &mut P, grads: &P, state: &mut AdamState, lr: f64, cfg: &AdamConfig) -> Result<()> {
    let named = grads.params();
    let shapes: Vec<usize> = params.params().iter().map(|(_, p)| p.len()).collect();
    if named.len() != shapes.len() || named.iter().zip(&shapes).any(|((_, g), &n)| g.len() != n) {
        return Err(Error::Shape("gradient tensors do not match the parameters".into()));
    }
    if state.m.len() != shapes.len() || state.m.iter().zip(&shapes).any(|(m, &n)| m.len() != n) {
        return Err(Error::Shape("optimizer state does not match the parameters".into()));
    }
    for (name, g) in &named {
        if let Some((i, v)) = g.iter().enumerate().find(|(_, v)| !v.is_finite()) {
            return Err(Error::Numeric(format!(
                "non-finite gradient {v} in {name}[{i}] at optimizer step {}",
                state.step + 1
            )));
        }
    }
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - cfg.beta1.powi(t);
    let c2 = 1.0 - cfg.beta2.powi(t);
    for (k, p) in params.params_mut().into_iter().enumerate() {
        let g = named[k].1;
        let (m, v) = (&mut state.m[k], &mut state.v[k]);
        for i in 0..p.len() {
            m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * g[i];
            v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * g[i] * g[i];
            let m_hat = m[i] / c1;
            let v_hat = v[i] / c2;
            p[i] -= lr * m_hat / (v_hat.sqrt() + cfg.eps);
        }
    }
    Ok(())
}
