use ndarray::Array2;
use serde::{Deserialize, Serialize};

use super::ModelState;
use crate::{Error, Result};

/// Adam hyperparameters with decoupled weight decay.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AdamWParams {
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    /// Decoupled decay coefficient lambda; each step applies
    /// `w -= lr * lambda * w` independently of the gradient update.
    pub weight_decay: f64,
}

impl Default for AdamWParams {
    fn default() -> Self {
        Self {
            learning_rate: 1e-3,
            beta1: 0.9,
            beta2: 0.98,
            epsilon: 1e-8,
            weight_decay: 2.0,
        }
    }
}

impl AdamWParams {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::InvalidArgument("learning_rate must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.beta1) || !(0.0..1.0).contains(&self.beta2) {
            return Err(Error::InvalidArgument("betas must be in [0, 1)".into()));
        }
        if !(self.epsilon > 0.0) {
            return Err(Error::InvalidArgument("epsilon must be positive".into()));
        }
        if self.weight_decay < 0.0 {
            return Err(Error::InvalidArgument("weight_decay must be nonnegative".into()));
        }
        Ok(())
    }
}

/// First/second moment accumulators mirroring the model's weight shapes.
#[derive(Debug, Clone)]
pub struct OptimizerState {
    pub params: AdamWParams,
    m: Vec<Array2<f64>>,
    v: Vec<Array2<f64>>,
    step: u64,
}

impl OptimizerState {
    pub fn new(model: &ModelState, params: AdamWParams) -> Result<Self> {
        params.validate()?;
        let zeros = |w: &Array2<f64>| Array2::zeros(w.raw_dim());
        Ok(Self {
            params,
            m: model.weights.iter().map(zeros).collect(),
            v: model.weights.iter().map(zeros).collect(),
            step: 0,
        })
    }

    pub fn step_count(&self) -> u64 {
        self.step
    }

    /// One AdamW update: bias-corrected moment step plus decoupled decay,
    /// both computed from the pre-update weights.
    pub fn step(&mut self, model: &mut ModelState, grads: &[Array2<f64>]) -> Result<()> {
        if grads.len() != model.weights.len() {
            return Err(Error::InvalidArgument(format!(
                "{} gradients for {} weight matrices",
                grads.len(),
                model.weights.len()
            )));
        }
        self.step += 1;
        let t = self.step as i32;
        let AdamWParams {
            learning_rate: lr,
            beta1,
            beta2,
            epsilon,
            weight_decay,
        } = self.params;
        let bc1 = 1.0 - beta1.powi(t);
        let bc2 = 1.0 - beta2.powi(t);

        for ((w, g), (m, v)) in model
            .weights
            .iter_mut()
            .zip(grads)
            .zip(self.m.iter_mut().zip(self.v.iter_mut()))
        {
            if g.raw_dim() != w.raw_dim() {
                return Err(Error::InvalidArgument("gradient shape mismatch".into()));
            }
            ndarray::Zip::from(w)
                .and(g)
                .and(m)
                .and(v)
                .for_each(|w, &g, m, v| {
                    *m = beta1 * *m + (1.0 - beta1) * g;
                    *v = beta2 * *v + (1.0 - beta2) * g * g;
                    let m_hat = *m / bc1;
                    let v_hat = *v / bc2;
                    *w -= lr * weight_decay * *w + lr * m_hat / (v_hat.sqrt() + epsilon);
                });
        }
        Ok(())
    }
}
