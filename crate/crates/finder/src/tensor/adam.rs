//! Adam optimizer with bias correction and per-iteration learning-rate decay.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::tensor::param::ParamSet;
use crate::tensor::Scalar;

#[derive(Debug, Clone, Copy, Serialize, Deserialize)]
pub struct AdamConfig {
    pub base_lr: f64,
    /// Multiplier applied to the learning rate once per iteration.
    pub decay: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            base_lr: 3e-4,
            decay: 0.999,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

/// Per-parameter first/second moment estimates plus the step counter.
pub struct AdamState<T: Scalar> {
    config: AdamConfig,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
    step: u64,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ParamSet<T>, config: AdamConfig) -> Self {
        let m = params
            .iter()
            .map(|(_, p)| vec![T::zero(); p.tensor().numel()])
            .collect::<Vec<_>>();
        let v = m.clone();
        AdamState {
            config,
            m,
            v,
            step: 0,
        }
    }

    pub fn iterations(&self) -> u64 {
        self.step
    }

    /// `base_lr * decay^k` after `k` completed iterations.
    pub fn effective_lr(&self) -> f64 {
        self.config.base_lr * self.config.decay.powf(self.step as f64)
    }

    /// One optimizer step over every parameter. Gradients must be populated.
    pub fn step(&mut self, params: &mut ParamSet<T>) -> Result<()> {
        let lr = T::from_f64(self.effective_lr());
        let b1 = T::from_f64(self.config.beta1);
        let b2 = T::from_f64(self.config.beta2);
        let eps = T::from_f64(self.config.epsilon);
        let t = self.step + 1;
        let bc1 = T::from_f64(1.0 - self.config.beta1.powi(t as i32));
        let bc2 = T::from_f64(1.0 - self.config.beta2.powi(t as i32));
        let one = T::one();

        for (id, _) in (0..params.len()).map(|i| (i, ())) {
            let param = params.get_mut(id);
            let name = param.name().to_string();
            let tensor = param.tensor_mut();
            let numel = tensor.numel();
            let grad = tensor
                .grad()
                .ok_or(Error::MissingGrad { name })?
                .to_vec();
            let m = &mut self.m[id];
            let v = &mut self.v[id];
            let data = tensor.data_mut();
            for i in 0..numel {
                let g = grad[i];
                m[i] = b1 * m[i] + (one - b1) * g;
                v[i] = b2 * v[i] + (one - b2) * g * g;
                let mhat = m[i] / bc1;
                let vhat = v[i] / bc2;
                data[i] = data[i] - lr * mhat / (vhat.sqrt() + eps);
            }
        }
        self.step = t;
        Ok(())
    }
}
