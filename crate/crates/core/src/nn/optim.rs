//! SGD with momentum and Adam.
//!
//! Momentum accumulates raw gradients: `v' = mu * v + g`, `p' = p - lr * v'`.
//! Adam increments its step counter before bias correction.

use serde::{Deserialize, Serialize};

use super::model::{Gradients, Mlp};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    SgdMomentum,
    Adam,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct AdamParams {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamParams {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdamMoments {
    pub m: Vec<f64>,
    pub v: Vec<f64>,
    pub step: u64,
}

impl AdamMoments {
    pub fn new(len: usize) -> Self {
        Self {
            m: vec![0.0; len],
            v: vec![0.0; len],
            step: 0,
        }
    }
}

fn check_lengths(params: usize, grads: usize, state: usize) -> Result<()> {
    if params != grads || params != state {
        return Err(Error::shape(format!(
            "optimizer step over {params} params, {grads} grads, {state} state entries"
        )));
    }
    Ok(())
}

pub fn sgd_momentum_step(
    params: &mut [f64],
    grads: &[f64],
    velocity: &mut [f64],
    lr: f64,
    momentum: f64,
) -> Result<()> {
    check_lengths(params.len(), grads.len(), velocity.len())?;
    for ((p, &g), v) in params.iter_mut().zip(grads).zip(velocity.iter_mut()) {
        *v = momentum * *v + g;
        *p -= lr * *v;
    }
    Ok(())
}

pub fn adam_step(
    params: &mut [f64],
    grads: &[f64],
    state: &mut AdamMoments,
    hp: AdamParams,
) -> Result<()> {
    check_lengths(params.len(), grads.len(), state.m.len())?;
    check_lengths(params.len(), grads.len(), state.v.len())?;
    state.step += 1;
    let t = state.step as i32;
    let c1 = 1.0 - hp.beta1.powi(t);
    let c2 = 1.0 - hp.beta2.powi(t);
    for (((p, &g), m), v) in params
        .iter_mut()
        .zip(grads)
        .zip(state.m.iter_mut())
        .zip(state.v.iter_mut())
    {
        *m = hp.beta1 * *m + (1.0 - hp.beta1) * g;
        *v = hp.beta2 * *v + (1.0 - hp.beta2) * g * g;
        let m_hat = *m / c1;
        let v_hat = *v / c2;
        *p -= hp.lr * m_hat / (v_hat.sqrt() + hp.eps);
    }
    Ok(())
}

/// Per-tensor optimizer buffers for one model, in [`Mlp::tensors`] order.
#[derive(Debug, Clone)]
pub enum OptimizerState {
    SgdMomentum {
        lr: f64,
        momentum: f64,
        velocity: Vec<Vec<f64>>,
    },
    Adam {
        hp: AdamParams,
        moments: Vec<AdamMoments>,
    },
}

impl OptimizerState {
    pub fn sgd_momentum(model: &Mlp, lr: f64, momentum: f64) -> Self {
        OptimizerState::SgdMomentum {
            lr,
            momentum,
            velocity: model.tensors().map(|t| vec![0.0; t.len()]).collect(),
        }
    }

    pub fn adam(model: &Mlp, hp: AdamParams) -> Self {
        OptimizerState::Adam {
            hp,
            moments: model.tensors().map(|t| AdamMoments::new(t.len())).collect(),
        }
    }

    pub fn apply(&mut self, model: &mut Mlp, grads: &Gradients) -> Result<()> {
        let n_grads = grads.tensors().count();
        match self {
            OptimizerState::SgdMomentum {
                lr,
                momentum,
                velocity,
            } => {
                if velocity.len() != n_grads {
                    return Err(Error::shape("gradient tensor count does not match optimizer"));
                }
                for ((p, g), v) in model.tensors_mut().zip(grads.tensors()).zip(velocity) {
                    sgd_momentum_step(p, g, v, *lr, *momentum)?;
                }
            }
            OptimizerState::Adam { hp, moments } => {
                if moments.len() != n_grads {
                    return Err(Error::shape("gradient tensor count does not match optimizer"));
                }
                for ((p, g), m) in model.tensors_mut().zip(grads.tensors()).zip(moments) {
                    adam_step(p, g, m, *hp)?;
                }
            }
        }
        Ok(())
    }
}
