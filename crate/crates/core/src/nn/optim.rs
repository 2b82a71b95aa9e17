use serde::{Deserialize, Serialize};

use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const ADAM_BETA1: f64 = 0.9;
pub const ADAM_BETA2: f64 = 0.999;
pub const ADAM_EPSILON: f64 = 1e-8;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum OptimizerKind {
    Sgd,
    Adam,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
}

impl OptimizerConfig {
    pub fn sgd(learning_rate: f64) -> Self {
        OptimizerConfig { kind: OptimizerKind::Sgd, learning_rate }
    }

    pub fn adam(learning_rate: f64) -> Self {
        OptimizerConfig { kind: OptimizerKind::Adam, learning_rate }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct OptimizerState {
    pub kind: OptimizerKind,
    pub learning_rate: f64,
    pub beta1: f64,
    pub beta2: f64,
    pub epsilon: f64,
    pub timestep: u64,
    first_moment: Vec<Vec<f64>>,
    second_moment: Vec<Vec<f64>>,
}

impl OptimizerState {
    pub fn new(config: OptimizerConfig) -> Result<Self> {
        if !(config.learning_rate > 0.0) {
            return Err(Error::invalid("learning_rate must be positive"));
        }
        Ok(OptimizerState {
            kind: config.kind,
            learning_rate: config.learning_rate,
            beta1: ADAM_BETA1,
            beta2: ADAM_BETA2,
            epsilon: ADAM_EPSILON,
            timestep: 0,
            first_moment: Vec::new(),
            second_moment: Vec::new(),
        })
    }

    /// Applies one update. Parameters are left untouched if any gradient
    /// is non-finite.
    pub fn step(&mut self, params: &mut [&mut Tensor], grads: &[Tensor]) -> Result<()> {
        if params.len() != grads.len() {
            return Err(Error::shape(format!("{} parameters but {} gradients", params.len(), grads.len())));
        }
        for (p, g) in params.iter().zip(grads) {
            if !p.same_shape(g) {
                return Err(Error::shape(format!("parameter {:?} vs gradient {:?}", p.shape(), g.shape())));
            }
            if !g.is_finite() {
                return Err(Error::Diverged("non-finite gradient".into()));
            }
        }
        match self.kind {
            OptimizerKind::Sgd => {
                for (p, g) in params.iter_mut().zip(grads) {
                    for (v, d) in p.data_mut().iter_mut().zip(g.data()) {
                        *v -= self.learning_rate * d;
                    }
                }
            }
            OptimizerKind::Adam => {
                if self.first_moment.is_empty() {
                    self.first_moment = grads.iter().map(|g| vec![0.0; g.numel()]).collect();
                    self.second_moment = self.first_moment.clone();
                } else if self.first_moment.len() != grads.len() {
                    return Err(Error::shape("adam state built for a different parameter set"));
                }
                self.timestep += 1;
                let t = self.timestep as i32;
                let c1 = 1.0 - self.beta1.powi(t);
                let c2 = 1.0 - self.beta2.powi(t);
                for (k, (p, g)) in params.iter_mut().zip(grads).enumerate() {
                    let (m, v) = (&mut self.first_moment[k], &mut self.second_moment[k]);
                    for (i, (w, &d)) in p.data_mut().iter_mut().zip(g.data()).enumerate() {
                        m[i] = self.beta1 * m[i] + (1.0 - self.beta1) * d;
                        v[i] = self.beta2 * v[i] + (1.0 - self.beta2) * d * d;
                        let m_hat = m[i] / c1;
                        let v_hat = v[i] / c2;
                        *w -= self.learning_rate * m_hat / (v_hat.sqrt() + self.epsilon);
                    }
                }
            }
        }
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn one(v: f64) -> Tensor {
        Tensor::scalar(v)
    }

    #[test]
    fn sgd_step() {
        let mut opt = OptimizerState::new(OptimizerConfig::sgd(0.01)).unwrap();
        let mut p = one(1.0);
        opt.step(&mut [&mut p], &[one(1.0)]).unwrap();
        assert!((p.data()[0] - 0.99).abs() < 1e-15);
        opt.step(&mut [&mut p], &[one(0.0)]).unwrap();
        assert!((p.data()[0] - 0.99).abs() < 1e-15);
    }

    #[test]
    fn adam_first_step_moves_by_learning_rate() {
        let mut opt = OptimizerState::new(OptimizerConfig::adam(0.01)).unwrap();
        let mut p = one(1.0);
        opt.step(&mut [&mut p], &[one(1.0)]).unwrap();
        assert!((1.0 - p.data()[0] - 0.01).abs() < 1e-8);
    }

    #[test]
    fn nan_gradient_diverges() {
        let mut opt = OptimizerState::new(OptimizerConfig::sgd(0.1)).unwrap();
        let mut p = one(1.0);
        let err = opt.step(&mut [&mut p], &[one(f64::NAN)]).unwrap_err();
        assert!(err.to_string().contains("diverged"));
        assert_eq!(p.data()[0], 1.0);
    }

    #[test]
    fn rejects_non_positive_rate() {
        assert!(OptimizerState::new(OptimizerConfig::sgd(0.0)).is_err());
    }
}
