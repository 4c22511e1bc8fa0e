use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::preprocess::DEFAULT_MAX_LENGTH;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub max_length: usize,
    pub conv_filters: usize,
    pub conv_kernel: usize,
    /// Hidden units per GRU direction.
    pub gru_hidden: usize,
    pub dropout: f64,
    pub learning_rate: f64,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub trainable_embeddings: bool,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_epsilon: f64,
}

impl Default for ModelConfig {
    fn default() -> Self {
        ModelConfig {
            max_length: DEFAULT_MAX_LENGTH,
            conv_filters: 128,
            conv_kernel: 3,
            gru_hidden: 64,
            dropout: 0.2,
            learning_rate: 1e-3,
            epochs: 15,
            batch_size: 32,
            seed: 42,
            trainable_embeddings: false,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_epsilon: 1e-8,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<()> {
        let counts = [
            ("max_length", self.max_length),
            ("conv_filters", self.conv_filters),
            ("conv_kernel", self.conv_kernel),
            ("gru_hidden", self.gru_hidden),
            ("epochs", self.epochs),
            ("batch_size", self.batch_size),
        ];
        for (name, value) in counts {
            if value == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::Config(format!("dropout {} outside [0, 1)", self.dropout)));
        }
        // Zero is allowed: it freezes every parameter, which tests rely on.
        if !(self.learning_rate >= 0.0 && self.learning_rate.is_finite()) {
            return Err(Error::Config(format!(
                "learning_rate {} must be finite and non-negative",
                self.learning_rate
            )));
        }
        if !(0.0..1.0).contains(&self.adam_beta1) || !(0.0..1.0).contains(&self.adam_beta2) {
            return Err(Error::Config("adam betas must lie in [0, 1)".into()));
        }
        if self.adam_epsilon.is_nan() || self.adam_epsilon <= 0.0 {
            return Err(Error::Config("adam_epsilon must be positive".into()));
        }
        Ok(())
    }
}
