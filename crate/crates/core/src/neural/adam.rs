use serde::{Deserialize, Serialize};

use super::Parameters;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AdamConfig {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    /// Decoupled (AdamW-style) weight decay.
    pub weight_decay: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        Self {
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
            weight_decay: 0.0,
        }
    }
}

impl AdamConfig {
    pub fn with_lr(lr: f64, weight_decay: f64) -> Self {
        Self {
            lr,
            weight_decay,
            ..Self::default()
        }
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AdamState {
    pub config: AdamConfig,
    pub step: u64,
    first: Vec<f64>,
    second: Vec<f64>,
}

impl AdamState {
    pub fn new(config: AdamConfig, num_params: usize) -> Self {
        Self {
            config,
            step: 0,
            first: vec![0.0; num_params],
            second: vec![0.0; num_params],
        }
    }

    /// One bias-corrected update of `params` from `grads` (same structure).
    pub fn step<P: Parameters>(&mut self, params: &mut P, grads: &P) {
        let c = self.config;
        self.step += 1;
        let bc1 = 1.0 - c.beta1.powi(self.step as i32);
        let bc2 = 1.0 - c.beta2.powi(self.step as i32);
        let mut offset = 0;
        for (p, g) in params.params_mut().into_iter().zip(grads.params()) {
            assert_eq!(p.shape(), g.shape(), "gradient shape mismatch");
            let n = p.data().len();
            let m = &mut self.first[offset..offset + n];
            let v = &mut self.second[offset..offset + n];
            for (((w, &gi), mi), vi) in p.data_mut().iter_mut().zip(g.data()).zip(m).zip(v) {
                *mi = c.beta1 * *mi + (1.0 - c.beta1) * gi;
                *vi = c.beta2 * *vi + (1.0 - c.beta2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *w -= c.lr * (mhat / (vhat.sqrt() + c.eps) + c.weight_decay * *w);
            }
            offset += n;
        }
        assert_eq!(offset, self.first.len(), "optimizer state size mismatch");
    }
}
