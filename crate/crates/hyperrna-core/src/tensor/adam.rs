//! Adam optimizer with bias correction, operating on plain tensors.

use alloc::vec::Vec;

use super::{Tensor, TensorError};
use crate::mathf;

/// Optimizer hyperparameters. Defaults match the training recipe used across
/// this project: lr 1e-4, beta1 0.9, beta2 0.999, eps 1e-8.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            lr: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

/// First/second moment estimates for a fixed list of parameters, plus the
/// shared step counter. The state is ordered: slot `i` always belongs to
/// parameter `i` of the list the state was built from, and checkpoints
/// serialize it in that order.
#[derive(Clone, Debug, PartialEq)]
pub struct AdamState {
    pub config: AdamConfig,
    /// Completed steps; bias correction uses this count after increment.
    pub t: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamState {
    pub fn new(params: &[Tensor], config: AdamConfig) -> Self {
        AdamState {
            config,
            t: 0,
            m: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
            v: params.iter().map(|p| Tensor::zeros(p.shape())).collect(),
        }
    }

    /// Rebuilds state from serialized moments (checkpoint loading).
    pub fn from_parts(
        config: AdamConfig,
        t: u64,
        m: Vec<Tensor>,
        v: Vec<Tensor>,
    ) -> Result<Self, TensorError> {
        if m.len() != v.len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_state",
                lhs: alloc::vec![m.len()],
                rhs: alloc::vec![v.len()],
            });
        }
        for (a, b) in m.iter().zip(&v) {
            if a.shape() != b.shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam_state",
                    lhs: a.shape().to_vec(),
                    rhs: b.shape().to_vec(),
                });
            }
        }
        Ok(AdamState { config, t, m, v })
    }

    pub fn moments(&self) -> (&[Tensor], &[Tensor]) {
        (&self.m, &self.v)
    }

    /// One optimization step over the whole parameter list. A zero gradient
    /// leaves its parameter bitwise unchanged while the moment decay and the
    /// step counter still advance; lr = 0 freezes all parameters exactly.
    pub fn step(&mut self, params: &mut [Tensor], grads: &[Tensor]) -> Result<(), TensorError> {
        if params.len() != self.m.len() || grads.len() != self.m.len() {
            return Err(TensorError::ShapeMismatch {
                op: "adam_step",
                lhs: alloc::vec![params.len()],
                rhs: alloc::vec![grads.len()],
            });
        }
        for i in 0..params.len() {
            if params[i].shape() != self.m[i].shape() || grads[i].shape() != self.m[i].shape() {
                return Err(TensorError::ShapeMismatch {
                    op: "adam_step",
                    lhs: params[i].shape().to_vec(),
                    rhs: grads[i].shape().to_vec(),
                });
            }
        }
        self.t += 1;
        let AdamConfig { lr, beta1, beta2, eps } = self.config;
        let bc1 = 1.0 - mathf::powi(beta1, self.t as i32);
        let bc2 = 1.0 - mathf::powi(beta2, self.t as i32);
        for ((p, g), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            let pd = p.data_mut();
            let gd = g.data();
            let md = m.data_mut();
            let vd = v.data_mut();
            for j in 0..pd.len() {
                md[j] = beta1 * md[j] + (1.0 - beta1) * gd[j];
                vd[j] = beta2 * vd[j] + (1.0 - beta2) * gd[j] * gd[j];
                let m_hat = md[j] / bc1;
                let v_hat = vd[j] / bc2;
                pd[j] -= lr * m_hat / (mathf::sqrt(v_hat) + eps);
            }
        }
        Ok(())
    }
}
