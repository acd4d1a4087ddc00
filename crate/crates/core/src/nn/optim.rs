use serde::{Deserialize, Serialize};

use super::params::ParamStore;
use super::tensor::{Real, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum OptimKind {
    Adam,
    Sgd,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OptimConfig {
    pub kind: OptimKind,
    pub lr: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Default for OptimConfig {
    fn default() -> Self {
        OptimConfig {
            kind: OptimKind::Adam,
            lr: 1e-3,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }
}

impl OptimConfig {
    pub fn with_lr(self, lr: f64) -> Self {
        OptimConfig { lr, ..self }
    }
}

/// Optimizer state for one [`ParamStore`].
#[derive(Debug, Clone)]
pub struct Optimizer<T> {
    pub config: OptimConfig,
    pub steps: u64,
    m: Vec<Vec<T>>,
    v: Vec<Vec<T>>,
}

impl<T: Real> Optimizer<T> {
    pub fn new(config: OptimConfig) -> Result<Self> {
        if !(config.lr > 0.0) {
            return Err(Error::InvalidParameter(format!("learning rate must be positive, got {}", config.lr)));
        }
        Ok(Optimizer {
            config,
            steps: 0,
            m: Vec::new(),
            v: Vec::new(),
        })
    }

    /// One update. `grads` is aligned with `store`; `None` entries are skipped.
    pub fn step(&mut self, store: &mut ParamStore<T>, grads: &[Option<Tensor<T>>]) -> Result<()> {
        if grads.len() != store.len() {
            return Err(Error::ShapeMismatch(format!(
                "{} gradients for {} parameters",
                grads.len(),
                store.len()
            )));
        }
        if self.m.is_empty() {
            let sizes: Vec<usize> = store.iter().map(|(_, t, _)| t.len()).collect();
            self.m = sizes.iter().map(|&n| vec![T::zero(); n]).collect();
            self.v = self.m.clone();
        }
        self.steps += 1;
        let c = self.config;
        let lr = T::lit(c.lr);
        let (b1, b2) = (T::lit(c.beta1), T::lit(c.beta2));
        let bc1 = T::lit(1.0 - c.beta1.powf(self.steps as f64));
        let bc2 = T::lit(1.0 - c.beta2.powf(self.steps as f64));
        let eps = T::lit(c.eps);
        for (i, (param, grad)) in store.tensors_mut().zip(grads).enumerate() {
            let Some(grad) = grad else { continue };
            if grad.shape() != param.shape() {
                return Err(Error::ShapeMismatch(format!(
                    "gradient {:?} for parameter {:?}",
                    grad.shape(),
                    param.shape()
                )));
            }
            match c.kind {
                OptimKind::Sgd => {
                    for (p, &g) in param.data_mut().iter_mut().zip(grad.data()) {
                        *p -= lr * g;
                    }
                }
                OptimKind::Adam => {
                    let (m, v) = (&mut self.m[i], &mut self.v[i]);
                    for (((p, &g), m), v) in param.data_mut().iter_mut().zip(grad.data()).zip(m.iter_mut()).zip(v.iter_mut()) {
                        *m = b1 * *m + (T::one() - b1) * g;
                        *v = b2 * *v + (T::one() - b2) * g * g;
                        let mhat = *m / bc1;
                        let vhat = *v / bc2;
                        *p -= lr * mhat / (vhat.sqrt() + eps);
                    }
                }
            }
        }
        Ok(())
    }
}
