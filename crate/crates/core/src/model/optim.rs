//! Mini-batch gradient descent with classic momentum and coupled weight decay.
//!
//! ```text
//! velocity <- momentum * velocity + grad + decay * param
//! param    <- param - lr * velocity
//! ```
//!
//! Decay is skipped for parameter groups flagged `decay = false` (biases).

use crate::error::{check_len, Error, Result};

pub const DEFAULT_LEARNING_RATE: f64 = 0.05;
pub const DEFAULT_MOMENTUM: f64 = 0.09;
pub const DEFAULT_WEIGHT_DECAY: f64 = 1e-4;

#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct SgdConfig {
    pub learning_rate: f64,
    pub momentum: f64,
    pub weight_decay: f64,
}

impl Default for SgdConfig {
    fn default() -> Self {
        Self {
            learning_rate: DEFAULT_LEARNING_RATE,
            momentum: DEFAULT_MOMENTUM,
            weight_decay: DEFAULT_WEIGHT_DECAY,
        }
    }
}

impl SgdConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning rate must be positive, got {}",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::Config(format!(
                "momentum must lie in [0, 1), got {}",
                self.momentum
            )));
        }
        if !(self.weight_decay >= 0.0 && self.weight_decay.is_finite()) {
            return Err(Error::Config(format!(
                "weight decay must be non-negative, got {}",
                self.weight_decay
            )));
        }
        Ok(())
    }
}

/// One trainable parameter group paired with its gradient.
pub struct ParamSlot<'a> {
    pub values: &'a mut [f64],
    pub grad: &'a [f64],
    pub decay: bool,
}

impl<'a> ParamSlot<'a> {
    pub fn new(values: &'a mut [f64], grad: &'a [f64], decay: bool) -> Self {
        Self { values, grad, decay }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct OptimizerState {
    pub config: SgdConfig,
    velocity: Vec<Vec<f64>>,
}

impl OptimizerState {
    /// Zero velocity buffers, one per parameter group of the given length.
    pub fn new(config: SgdConfig, group_lengths: &[usize]) -> Result<Self> {
        config.validate()?;
        Ok(Self {
            config,
            velocity: group_lengths.iter().map(|&n| vec![0.0; n]).collect(),
        })
    }

    pub fn velocity(&self) -> &[Vec<f64>] {
        &self.velocity
    }

    pub fn step(&mut self, slots: &mut [ParamSlot<'_>]) -> Result<()> {
        check_len("optimizer parameter groups", self.velocity.len(), slots.len())?;
        for (slot, vel) in slots.iter().zip(&self.velocity) {
            check_len("optimizer velocity", vel.len(), slot.values.len())?;
            check_len("optimizer gradient", vel.len(), slot.grad.len())?;
        }
        let SgdConfig {
            learning_rate,
            momentum,
            weight_decay,
        } = self.config;
        for (slot, vel) in slots.iter_mut().zip(self.velocity.iter_mut()) {
            let decay = if slot.decay { weight_decay } else { 0.0 };
            for ((p, &g), v) in slot.values.iter_mut().zip(slot.grad).zip(vel.iter_mut()) {
                *v = momentum * *v + g + decay * *p;
                *p -= learning_rate * *v;
            }
        }
        Ok(())
    }
}
