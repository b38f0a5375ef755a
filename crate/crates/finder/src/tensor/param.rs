//! Named parameter registry with gradient accumulation and global-norm
//! clipping.

use std::collections::HashMap;

use crate::error::{Error, Result};
use crate::tensor::{Scalar, Tensor};

pub type ParamId = usize;

/// Gradients keyed by parameter id, as returned by `Tape::backward`.
pub type GradMap<T> = HashMap<ParamId, Vec<T>>;

#[derive(Debug, Clone)]
pub struct Param<T: Scalar> {
    name: String,
    tensor: Tensor<T>,
}

impl<T: Scalar> Param<T> {
    pub fn name(&self) -> &str {
        &self.name
    }

    pub fn tensor(&self) -> &Tensor<T> {
        &self.tensor
    }

    pub fn tensor_mut(&mut self) -> &mut Tensor<T> {
        &mut self.tensor
    }
}

/// All trainable tensors of a model, in registration order.
#[derive(Debug, Clone, Default)]
pub struct ParamSet<T: Scalar> {
    params: Vec<Param<T>>,
    by_name: HashMap<String, ParamId>,
}

impl<T: Scalar> ParamSet<T> {
    pub fn new() -> Self {
        ParamSet {
            params: Vec::new(),
            by_name: HashMap::new(),
        }
    }

    pub fn register(&mut self, name: impl Into<String>, tensor: Tensor<T>) -> Result<ParamId> {
        let name = name.into();
        if self.by_name.contains_key(&name) {
            return Err(Error::Config(format!("duplicate parameter '{name}'")));
        }
        let id = self.params.len();
        self.by_name.insert(name.clone(), id);
        self.params.push(Param {
            name,
            tensor: tensor.with_requires_grad(true),
        });
        Ok(id)
    }

    pub fn len(&self) -> usize {
        self.params.len()
    }

    pub fn is_empty(&self) -> bool {
        self.params.is_empty()
    }

    /// Total number of trainable scalars.
    pub fn scalar_count(&self) -> usize {
        self.params.iter().map(|p| p.tensor.numel()).sum()
    }

    pub fn get(&self, id: ParamId) -> &Param<T> {
        &self.params[id]
    }

    pub fn get_mut(&mut self, id: ParamId) -> &mut Param<T> {
        &mut self.params[id]
    }

    pub fn id_of(&self, name: &str) -> Option<ParamId> {
        self.by_name.get(name).copied()
    }

    pub fn by_name(&self, name: &str) -> Option<&Param<T>> {
        self.id_of(name).map(|id| self.get(id))
    }

    pub fn iter(&self) -> impl Iterator<Item = (ParamId, &Param<T>)> {
        self.params.iter().enumerate()
    }

    /// Fold a backward pass's gradients into the accumulators.
    pub fn accumulate(&mut self, grads: &GradMap<T>) -> Result<()> {
        for (&id, g) in grads {
            self.params[id].tensor.accumulate_grad(g)?;
        }
        Ok(())
    }

    /// Fold scaled gradients into the accumulators (each parameter has its
    /// own accumulator, so map iteration order cannot affect the result).
    pub fn accumulate_scaled(&mut self, grads: &GradMap<T>, scale: T) -> Result<()> {
        let mut buf = Vec::new();
        for (&id, g) in grads {
            buf.clear();
            buf.extend(g.iter().map(|&v| v * scale));
            self.params[id].tensor.accumulate_grad(&buf)?;
        }
        Ok(())
    }

    /// Add the analytic weight-decay gradient `2·lambda·w` for every
    /// parameter (the decay term of the training loss).
    pub fn add_decay_grads(&mut self, lambda: T) -> Result<()> {
        let two = T::from_f64(2.0);
        for p in self.params.iter_mut() {
            let g: Vec<T> = p.tensor.data().iter().map(|&w| two * lambda * w).collect();
            p.tensor.accumulate_grad(&g)?;
        }
        Ok(())
    }

    pub fn zero_grad(&mut self) {
        for p in self.params.iter_mut() {
            p.tensor.zero_grad();
        }
    }

    /// Sum of squared weights, the `sum ||W||^2` term of the decayed loss.
    pub fn squared_norm(&self) -> T {
        let mut s = T::zero();
        for p in &self.params {
            for &w in p.tensor.data() {
                s = s + w * w;
            }
        }
        s
    }

    /// Euclidean norm over all gradients taken together.
    pub fn global_grad_norm(&self) -> T {
        let mut s = T::zero();
        for p in &self.params {
            if let Some(g) = p.tensor.grad() {
                for &v in g {
                    s = s + v * v;
                }
            }
        }
        s.sqrt()
    }

    /// Rescale all gradients so the global norm does not exceed `threshold`.
    /// A norm already below the threshold is left untouched, so the gradient
    /// direction is always preserved.
    pub fn clip_gradients(&mut self, threshold: T) -> T {
        let norm = self.global_grad_norm();
        if norm > threshold && norm > T::zero() {
            let scale = threshold / norm;
            for p in self.params.iter_mut() {
                let t = &mut p.tensor;
                if t.grad().is_some() {
                    let n = t.numel();
                    let mut g = t.grad().unwrap().to_vec();
                    for v in g.iter_mut() {
                        *v = *v * scale;
                    }
                    t.zero_grad();
                    t.accumulate_grad(&g[..n]).expect("same shape");
                }
            }
        }
        norm
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn set_with_grads(grads: &[&[f64]]) -> ParamSet<f64> {
        let mut ps = ParamSet::new();
        for (i, g) in grads.iter().enumerate() {
            let id = ps
                .register(format!("p{i}"), Tensor::zeros(vec![g.len()]))
                .unwrap();
            ps.get_mut(id).tensor_mut().accumulate_grad(g).unwrap();
        }
        ps
    }

    #[test]
    fn clip_rescales_above_threshold() {
        // grads (6, 8): norm 10, threshold 5 -> scaled by 0.5
        let mut ps = set_with_grads(&[&[6.0], &[8.0]]);
        let norm = ps.clip_gradients(5.0);
        assert!((norm - 10.0).abs() < 1e-12);
        assert_eq!(ps.get(0).tensor().grad().unwrap(), &[3.0]);
        assert_eq!(ps.get(1).tensor().grad().unwrap(), &[4.0]);
    }

    #[test]
    fn clip_leaves_small_gradients_alone() {
        let mut ps = set_with_grads(&[&[0.6], &[0.8]]);
        ps.clip_gradients(5.0);
        assert_eq!(ps.get(0).tensor().grad().unwrap(), &[0.6]);
        assert_eq!(ps.get(1).tensor().grad().unwrap(), &[0.8]);
    }

    #[test]
    fn clip_preserves_direction() {
        let g = [3.0, -4.0, 12.0];
        let mut ps = set_with_grads(&[&g]);
        ps.clip_gradients(1.0);
        let clipped = ps.get(0).tensor().grad().unwrap().to_vec();
        let dot: f64 = g.iter().zip(&clipped).map(|(a, b)| a * b).sum();
        let n1: f64 = g.iter().map(|v| v * v).sum::<f64>().sqrt();
        let n2: f64 = clipped.iter().map(|v| v * v).sum::<f64>().sqrt();
        assert!((dot / (n1 * n2) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut ps = ParamSet::<f64>::new();
        ps.register("w", Tensor::zeros(vec![1])).unwrap();
        assert!(ps.register("w", Tensor::zeros(vec![1])).is_err());
    }
}
