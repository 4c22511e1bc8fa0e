//! Bi-GRU-CNN tweet classifier.
//!
//! ```text
//! tokens ─ embedding ─ dropout ─ Conv1D(ReLU) ─┬─ GRU → ─┬─ max over time ─ dropout ─ dense ─ sigmoid
//!                                              └─ GRU ← ─┘
//! ```
//!
//! Shapes, with `D` the embedding dimension, `F` = `conv_filters`,
//! `K` = `conv_kernel`, `H` = `gru_hidden` and `V` the vocabulary size:
//!
//! | tensor                      | shape        |
//! |-----------------------------|--------------|
//! | embedding                   | `V x D`      |
//! | `conv.weight`               | `F x (K*D)`  |
//! | `conv.bias`                 | `F`          |
//! | `gru_{fwd,bwd}.w_{z,r,n}`   | `H x F`      |
//! | `gru_{fwd,bwd}.u_{z,r,n}`   | `H x H`      |
//! | `gru_{fwd,bwd}.b_{z,r,n}`   | `H`          |
//! | `dense.weight`              | `2H`         |
//! | `dense.bias`                | `1`          |
//!
//! The convolution uses "same" zero padding (`(K-1)/2` on the left). The GRU
//! cell is
//!
//! ```text
//! z = σ(W_z x + U_z h + b_z)
//! r = σ(W_r x + U_r h + b_r)
//! n = tanh(W_n x + U_n (r ⊙ h) + b_n)
//! h' = (1 - z) ⊙ n + z ⊙ h
//! ```

mod adam;
pub mod checkpoint;
mod config;
mod network;
mod params;
mod train;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub use adam::Adam;
pub use config::ModelConfig;
pub use network::{loss, Gradients, Pass};
pub use params::{GruWeights, Weights};
pub use train::{encode_tweets, fit, predict, predict_probabilities, train, EpochRecord, Prediction, TrainOutcome};

use crate::embeddings::EmbeddingTable;
use crate::error::Result;

/// Model parameters together with the vocabulary they index and the
/// optimizer state.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelState {
    pub config: ModelConfig,
    pub embeddings: EmbeddingTable,
    pub weights: Weights,
    pub optimizer: Adam,
}

impl ModelState {
    /// Fresh model with weights drawn from `config.seed`.
    pub fn new(config: ModelConfig, embeddings: EmbeddingTable) -> Result<Self> {
        config.validate()?;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let weights = Weights::init(&config, embeddings.dim(), &mut rng);
        let optimizer = Adam::new(
            &weights,
            config
                .trainable_embeddings
                .then(|| embeddings.matrix().dim()),
        );
        Ok(ModelState {
            config,
            embeddings,
            weights,
            optimizer,
        })
    }

    pub fn apply_gradients(&mut self, grads: &Gradients) {
        let embedding = self
            .config
            .trainable_embeddings
            .then(|| self.embeddings.matrix_mut());
        self.optimizer
            .update(&self.config, &mut self.weights, embedding, grads);
    }

    pub fn all_finite(&self) -> bool {
        self.weights.all_finite() && self.embeddings.matrix().iter().all(|v| v.is_finite())
    }
}
