use alloc::vec::Vec;

use super::params::Params;
use super::tensor::Tensor;
use crate::error::{bail, Result};

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl AdamConfig {
    pub fn with_lr(lr: f64) -> Self {
        AdamConfig { lr, ..Self::default() }
    }
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig { lr: 1e-3, beta1: 0.9, beta2: 0.999, eps: 1e-8 }
    }
}

/// First/second moment estimates and step counter.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState {
    pub step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &Params) -> Self {
        let zeros = || params.values().iter().map(|t| Tensor::zeros(t.rows(), t.cols())).collect();
        AdamState { step: 0, m: zeros(), v: zeros() }
    }
}

/// One bias-corrected Adam update of every parameter in place.
pub fn adam_step(params: &mut Params, grads: &[Tensor], cfg: &AdamConfig, state: &mut AdamState) -> Result<()> {
    if grads.len() != params.len() || state.m.len() != params.len() {
        bail!(Shape, "{} gradients / {} moments for {} parameters", grads.len(), state.m.len(), params.len());
    }
    state.step += 1;
    let t = state.step as f64;
    let bc1 = 1.0 - libm::pow(cfg.beta1, t);
    let bc2 = 1.0 - libm::pow(cfg.beta2, t);
    for (i, id) in params.ids().collect::<Vec<_>>().into_iter().enumerate() {
        let g = &grads[i];
        let p = params.get_mut(id);
        if g.shape() != p.shape() {
            bail!(Shape, "gradient {:?} for parameter {:?}", g.shape(), p.shape());
        }
        let (m, v) = (&mut state.m[i], &mut state.v[i]);
        for (((pp, gg), mm), vv) in p.data_mut().iter_mut().zip(g.data()).zip(m.data_mut()).zip(v.data_mut()) {
            *mm = cfg.beta1 * *mm + (1.0 - cfg.beta1) * gg;
            *vv = cfg.beta2 * *vv + (1.0 - cfg.beta2) * gg * gg;
            let mhat = *mm / bc1;
            let vhat = *vv / bc2;
            *pp -= cfg.lr * mhat / (libm::sqrt(vhat) + cfg.eps);
        }
    }
    Ok(())
}
