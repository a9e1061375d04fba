//! AdamW with decoupled weight decay, global-norm gradient clipping, and the
//! exponential-moving-average target update.

use crate::error::{Error, Result};
use crate::tensor::Tensor;
use alloc::vec::Vec;

#[derive(Debug, Clone, Copy, PartialEq)]
#[cfg_attr(feature = "serde", derive(serde::Serialize, serde::Deserialize))]
pub struct AdamWConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub weight_decay: f64,
}

impl Default for AdamWConfig {
    fn default() -> Self {
        AdamWConfig {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
            weight_decay: 0.01,
        }
    }
}

/// Per-parameter first/second moment accumulators plus the step counter.
#[derive(Debug, Clone)]
pub struct AdamWState {
    pub config: AdamWConfig,
    step: u64,
    m: Vec<Tensor>,
    v: Vec<Tensor>,
}

impl AdamWState {
    /// Moments are shaped after the parameter list; `step` keeps the same
    /// parameter ordering.
    pub fn new(config: AdamWConfig, params: &[&Tensor]) -> Self {
        let m = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        let v = params.iter().map(|p| Tensor::zeros(p.rows(), p.cols())).collect();
        AdamWState { config, step: 0, m, v }
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One AdamW update. Parameters must carry populated gradients in the
    /// same order the state was built with; decay is decoupled
    /// (p ← p·(1 − lr·decay) before the moment update).
    pub fn step(&mut self, params: &mut [&mut Tensor]) -> Result<()> {
        if params.len() != self.m.len() {
            return Err(Error::ShapeMismatch {
                op: "adamw_step",
                expected: (self.m.len(), 1),
                got: (params.len(), 1),
            });
        }
        self.step += 1;
        let c = self.config;
        let bias1 = 1.0 - libm::pow(c.beta1, self.step as f64);
        let bias2 = 1.0 - libm::pow(c.beta2, self.step as f64);
        for (i, p) in params.iter_mut().enumerate() {
            let n = p.len();
            if self.m[i].len() != n {
                return Err(Error::ShapeMismatch {
                    op: "adamw_step moments",
                    expected: self.m[i].shape(),
                    got: p.shape(),
                });
            }
            let grad: Vec<f64> = match p.grad() {
                Some(g) => g.to_vec(),
                None => alloc::vec![0.0; n],
            };
            let m = self.m[i].data_mut();
            let v = self.v[i].data_mut();
            let data = p.data_mut();
            for k in 0..n {
                if c.weight_decay != 0.0 {
                    data[k] -= c.learning_rate * c.weight_decay * data[k];
                }
                let g = grad[k];
                m[k] = c.beta1 * m[k] + (1.0 - c.beta1) * g;
                v[k] = c.beta2 * v[k] + (1.0 - c.beta2) * g * g;
                let m_hat = m[k] / bias1;
                let v_hat = v[k] / bias2;
                data[k] -= c.learning_rate * m_hat / (libm::sqrt(v_hat) + c.epsilon);
            }
        }
        Ok(())
    }
}

/// Scale all gradients by max_norm/norm when the global L2 norm of the
/// concatenated gradients exceeds max_norm. Returns the pre-clip norm.
pub fn clip_grad_norm(params: &mut [&mut Tensor], max_norm: f64) -> f64 {
    debug_assert!(max_norm > 0.0);
    let mut sq = 0.0;
    for p in params.iter() {
        if let Some(g) = p.grad() {
            sq += g.iter().map(|x| x * x).sum::<f64>();
        }
    }
    let norm = libm::sqrt(sq);
    if norm > max_norm {
        let scale = max_norm / norm;
        for p in params.iter_mut() {
            let grad = p.grad_mut();
            for g in grad {
                *g *= scale;
            }
        }
    }
    norm
}

/// θ_t ← τ·θ_t + (1−τ)·θ_c elementwise over parameter pairs.
pub fn ema_update(target: &mut [&mut Tensor], source: &[&Tensor], tau: f64) {
    debug_assert!((0.0..=1.0).contains(&tau));
    debug_assert_eq!(target.len(), source.len());
    for (t, s) in target.iter_mut().zip(source) {
        debug_assert_eq!(t.shape(), s.shape());
        let td = t.data_mut();
        for (tv, sv) in td.iter_mut().zip(s.data()) {
            *tv = tau * *tv + (1.0 - tau) * *sv;
        }
    }
}
