use alloc::vec;
use alloc::vec::Vec;

use crate::error::{Error, Result};
use crate::math;

/// SGD with momentum; weight decay is folded into the momentum buffer.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimState {
    pub buffers: Vec<f64>,
    pub lr: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl OptimState {
    pub fn new(n_params: usize, lr: f64, momentum: f64, weight_decay: f64) -> Self {
        Self {
            buffers: vec![0.0; n_params],
            lr,
            momentum,
            weight_decay,
        }
    }
}

/// `buf <- momentum * buf + grad + wd * param; param <- param - lr * buf`.
///
/// A non-finite gradient aborts the step before anything is modified.
pub fn sgd_step(params: &mut [f64], grads: &[f64], state: &mut OptimState) -> Result<()> {
    if params.len() != grads.len() || params.len() != state.buffers.len() {
        return Err(Error::Shape(alloc::format!(
            "params {} / grads {} / buffers {}",
            params.len(),
            grads.len(),
            state.buffers.len()
        )));
    }
    if let Some(index) = grads.iter().position(|g| !g.is_finite()) {
        return Err(Error::NonFiniteGradient { index });
    }
    let OptimState {
        buffers,
        lr,
        momentum,
        weight_decay,
    } = state;
    for ((p, &g), b) in params.iter_mut().zip(grads).zip(buffers.iter_mut()) {
        *b = *momentum * *b + g + *weight_decay * *p;
        *p -= *lr * *b;
    }
    Ok(())
}

/// Cosine interpolation from `lr_initial` (first epoch) to `lr_final` (last).
pub fn lr_at(lr_initial: f64, lr_final: f64, epochs: usize, epoch: usize) -> f64 {
    if epochs <= 1 {
        return lr_initial;
    }
    let t = epoch.min(epochs - 1) as f64 / (epochs - 1) as f64;
    lr_final + (lr_initial - lr_final) * 0.5 * (1.0 + math::cos(core::f64::consts::PI * t))
}
