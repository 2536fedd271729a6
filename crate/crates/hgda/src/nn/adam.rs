//! Adam with decoupled weight decay.

use serde::{Deserialize, Serialize};

use crate::mat::Mat;

/// Optimizer state: one first/second moment pair per parameter, in the
/// caller's fixed parameter order.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AdamState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub weight_decay: f64,
    pub step: u64,
    pub m: Vec<Mat>,
    pub v: Vec<Mat>,
}

impl AdamState {
    /// Fresh state for parameters of the given shapes.
    pub fn new(lr: f64, weight_decay: f64, shapes: &[(usize, usize)]) -> Self {
        AdamState {
            lr,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay,
            step: 0,
            m: shapes.iter().map(|&(r, c)| Mat::zeros(r, c)).collect(),
            v: shapes.iter().map(|&(r, c)| Mat::zeros(r, c)).collect(),
        }
    }

    /// One update. Decoupled weight decay (θ ← θ − lr·wd·θ) is applied
    /// before the bias-corrected Adam delta.
    pub fn step(&mut self, params: &mut [&mut Mat], grads: &[Mat]) {
        assert_eq!(params.len(), self.m.len(), "parameter count mismatch");
        assert_eq!(params.len(), grads.len(), "gradient count mismatch");
        self.step += 1;
        let t = self.step as i32;
        let bc1 = 1.0 - self.beta1.powi(t);
        let bc2 = 1.0 - self.beta2.powi(t);
        for ((theta, grad), (m, v)) in params
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            assert_eq!(theta.shape(), grad.shape(), "parameter/gradient shape mismatch");
            let decay = 1.0 - self.lr * self.weight_decay;
            for ((p, &g), (mm, vv)) in theta
                .as_mut_slice()
                .iter_mut()
                .zip(grad.as_slice())
                .zip(m.as_mut_slice().iter_mut().zip(v.as_mut_slice().iter_mut()))
            {
                *p *= decay;
                *mm = self.beta1 * *mm + (1.0 - self.beta1) * g;
                *vv = self.beta2 * *vv + (1.0 - self.beta2) * g * g;
                let m_hat = *mm / bc1;
                let v_hat = *vv / bc2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            }
        }
    }
}
