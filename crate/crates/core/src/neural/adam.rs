use serde::{Deserialize, Serialize};

use super::model::ModelParams;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::scalar::Scalar;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct AdamConfig {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
}

impl Default for AdamConfig {
    fn default() -> Self {
        AdamConfig {
            learning_rate: 1e-4,
            beta1: 0.9,
            beta2: 0.999,
            epsilon: 1e-8,
        }
    }
}

impl AdamConfig {
    pub fn validate(&self) -> Result<()> {
        let ok = self.learning_rate > 0.0
            && self.learning_rate.is_finite()
            && (0.0..1.0).contains(&self.beta1)
            && (0.0..1.0).contains(&self.beta2)
            && self.epsilon > 0.0;
        if ok {
            Ok(())
        } else {
            Err(Error::Config(format!("invalid optimizer settings {self:?}")))
        }
    }
}

/// First and second moments for every parameter tensor.
#[derive(Debug, Clone, PartialEq)]
pub struct AdamState<T> {
    pub config: AdamConfig,
    pub step: u64,
    m: Vec<Tensor<T>>,
    v: Vec<Tensor<T>>,
}

impl<T: Scalar> AdamState<T> {
    pub fn new(params: &ModelParams<T>, config: AdamConfig) -> Self {
        let zeros: Vec<Tensor<T>> = params.tensors().iter().map(|(_, t)| Tensor::zeros(t.shape())).collect();
        AdamState {
            config,
            step: 0,
            m: zeros.clone(),
            v: zeros,
        }
    }

    /// One bias-corrected update of `params` along `grads`.
    pub fn update(&mut self, params: &mut ModelParams<T>, grads: &ModelParams<T>) -> Result<()> {
        let gs = grads.tensors();
        let ps = params.tensors_mut();
        if ps.len() != self.m.len() || gs.len() != ps.len() {
            return Err(Error::Shape("optimizer state does not match the parameters".into()));
        }
        self.step += 1;
        let c = self.config;
        let (b1, b2) = (T::of(c.beta1), T::of(c.beta2));
        let one = T::one();
        let t = self.step as i32;
        let bc1 = one - T::of(c.beta1.powi(t));
        let bc2 = one - T::of(c.beta2.powi(t));
        let (lr, eps) = (T::of(c.learning_rate), T::of(c.epsilon));
        for (((name, p), (_, g)), (m, v)) in ps.into_iter().zip(gs).zip(self.m.iter_mut().zip(&mut self.v)) {
            if p.shape() != g.shape() || p.shape() != m.shape() {
                return Err(Error::Shape(format!("gradient for `{name}` has the wrong shape")));
            }
            for (((pi, &gi), mi), vi) in p
                .data_mut()
                .iter_mut()
                .zip(g.data())
                .zip(m.data_mut().iter_mut())
                .zip(v.data_mut().iter_mut())
            {
                *mi = b1 * *mi + (one - b1) * gi;
                *vi = b2 * *vi + (one - b2) * gi * gi;
                let mhat = *mi / bc1;
                let vhat = *vi / bc2;
                *pi -= lr * mhat / (vhat.sqrt() + eps);
            }
        }
        Ok(())
    }
}
