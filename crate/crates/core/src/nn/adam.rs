use alloc::vec::Vec;
use serde::{Deserialize, Serialize};

use super::model::Seq2SeqModel;
use super::NnError;
use crate::math::{powf, sqrt};

/// Adam with global-norm gradient clipping.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OptimizerState {
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub clipnorm: f64,
    /// First moments, one vector per parameter tensor.
    pub m: Vec<Vec<f64>>,
    pub v: Vec<Vec<f64>>,
    pub step: u64,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct StepStats {
    pub grad_norm: f64,
    pub clipped: bool,
}

/// L2 norm over every entry of every tensor.
pub fn global_norm(model: &Seq2SeqModel) -> f64 {
    sqrt(model.tensors().iter().flat_map(|t| t.iter()).map(|g| g * g).sum())
}

impl OptimizerState {
    /// Defaults: β1 = β2 = 0.999, ε = 1e-8, clip norm 0.1.
    pub fn new(lr: f64, model: &Seq2SeqModel) -> Self {
        let shapes = model.tensors().iter().map(|t| alloc::vec![0.0; t.len()]).collect::<Vec<_>>();
        Self { lr, beta1: 0.999, beta2: 0.999, epsilon: 1e-8, clipnorm: 0.1, m: shapes.clone(), v: shapes, step: 0 }
    }

    pub fn validate(&self) -> Result<(), NnError> {
        if !(self.lr > 0.0) {
            return Err(NnError::InvalidConfig("learning rate must be positive"));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(NnError::InvalidConfig("betas must lie in [0, 1)"));
        }
        if !(self.clipnorm > 0.0) || !(self.epsilon > 0.0) {
            return Err(NnError::InvalidConfig("clipnorm and epsilon must be positive"));
        }
        Ok(())
    }

    /// Clips `grads` to the global norm and applies one Adam update. Nothing is
    /// modified if any gradient entry is non-finite.
    pub fn clip_and_step(&mut self, params: &mut Seq2SeqModel, grads: &Seq2SeqModel) -> Result<StepStats, NnError> {
        let g = grads.tensors();
        if g.len() != self.m.len() || g.iter().zip(&self.m).any(|(a, b)| a.len() != b.len()) {
            return Err(NnError::ShapeMismatch { what: "optimizer state", expected: self.m.len(), got: g.len() });
        }
        if let Some(i) = g.iter().position(|t| t.iter().any(|x| !x.is_finite())) {
            return Err(NnError::NonFiniteGradient(grads.tensor_names().swap_remove(i)));
        }
        let norm = global_norm(grads);
        let clipped = norm > self.clipnorm;
        let factor = if clipped { self.clipnorm / norm } else { 1.0 };
        self.step += 1;
        let bc1 = 1.0 - powf(self.beta1, self.step as f64);
        let bc2 = 1.0 - powf(self.beta2, self.step as f64);
        for (((theta, grad), m), v) in params.tensors_mut().into_iter().zip(g).zip(&mut self.m).zip(&mut self.v) {
            for i in 0..theta.len() {
                let gi = grad[i] * factor;
                m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * gi;
                v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * gi * gi;
                let m_hat = m[i] / bc1;
                let v_hat = v[i] / bc2;
                theta[i] -= self.lr * m_hat / (sqrt(v_hat) + self.epsilon);
            }
        }
        Ok(StepStats { grad_norm: norm, clipped })
    }
}
