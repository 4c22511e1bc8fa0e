use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::network::Pass;
use super::{ModelConfig, ModelState};
use crate::corpus::{Label, Tweet};
use crate::embeddings::EmbeddingTable;
use crate::ensemble::PredictionSet;
use crate::error::{Error, Result};
use crate::metrics::ConfusionMatrix;
use crate::preprocess::{prepare, TokenSequence};

/// Offset separating the shuffling/dropout stream from weight initialization.
const TRAIN_STREAM: u64 = 0x9e37_79b9_7f4a_7c15;
const EVAL_CHUNK: usize = 256;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EpochRecord {
    pub epoch: usize,
    /// Mean mini-batch loss with dropout active.
    pub train_loss: f64,
    pub train_accuracy: f64,
    pub dev_loss: f64,
    pub dev_accuracy: f64,
    pub dev_f1: f64,
}

impl EpochRecord {
    pub fn to_key_values(&self) -> String {
        format!(
            "epoch={} train_loss={:.6} train_accuracy={:.4} dev_loss={:.6} dev_accuracy={:.4} dev_f1={:.4}",
            self.epoch, self.train_loss, self.train_accuracy, self.dev_loss, self.dev_accuracy, self.dev_f1
        )
    }
}

#[derive(Debug, Clone)]
pub struct TrainOutcome {
    /// State from the selected epoch (best dev F1).
    pub state: ModelState,
    pub history: Vec<EpochRecord>,
    /// 1-based; 0 when no epoch ran.
    pub best_epoch: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub probability: f64,
    pub label: Label,
}

impl Prediction {
    pub fn from_probability(probability: f64) -> Self {
        Prediction {
            probability,
            label: Label::from_probability(probability),
        }
    }
}

/// Encodes tweets against the model vocabulary and returns 0/1 targets for
/// labeled ones. `require_labels` turns a missing label into an error.
pub fn encode_tweets(
    tweets: &[Tweet],
    embeddings: &EmbeddingTable,
    max_length: usize,
    require_labels: bool,
) -> Result<(Vec<TokenSequence>, Vec<f64>)> {
    let mut seqs = Vec::with_capacity(tweets.len());
    let mut targets = Vec::with_capacity(tweets.len());
    for tweet in tweets {
        seqs.push(prepare(&tweet.text, embeddings, max_length));
        match tweet.label {
            Some(label) => targets.push(label.target()),
            None if require_labels => {
                return Err(Error::UnlabeledRecord {
                    split: "training".into(),
                    id: tweet.id.clone(),
                })
            }
            None => {}
        }
    }
    Ok((seqs, targets))
}

struct Evaluation {
    loss: f64,
    accuracy: f64,
    f1: f64,
}

fn evaluate_encoded(state: &ModelState, seqs: &[TokenSequence], targets: &[f64]) -> Result<Evaluation> {
    let mut loss_sum = 0.0;
    let mut matrix = ConfusionMatrix::default();
    for (chunk, chunk_targets) in seqs.chunks(EVAL_CHUNK).zip(targets.chunks(EVAL_CHUNK)) {
        let logits = state.logits(chunk, Pass::Eval)?;
        for (&logit, &t) in logits.iter().zip(chunk_targets) {
            loss_sum += super::network::bce_with_logit(logit, t);
            let predicted = Label::from_probability(super::network::sigmoid(logit));
            let gold = if t == 1.0 { Label::Informative } else { Label::Uninformative };
            matrix.record(predicted, gold);
        }
    }
    let n = seqs.len().max(1) as f64;
    Ok(Evaluation {
        loss: loss_sum / n,
        accuracy: matrix.accuracy(),
        f1: matrix.f1(),
    })
}

/// Builds a fresh model and trains it.
pub fn train(
    config: ModelConfig,
    embeddings: EmbeddingTable,
    train_set: &[Tweet],
    dev_set: &[Tweet],
) -> Result<TrainOutcome> {
    fit(ModelState::new(config, embeddings)?, train_set, dev_set)
}

/// Runs `config.epochs` epochs of shuffled mini-batch Adam updates and
/// returns the epoch with the best dev F1 (ties go to the lower dev loss,
/// then to the earlier epoch).
pub fn fit(mut state: ModelState, train_set: &[Tweet], dev_set: &[Tweet]) -> Result<TrainOutcome> {
    state.config.validate()?;
    if train_set.is_empty() {
        return Err(Error::Config("training set is empty".into()));
    }
    let max_length = state.config.max_length;
    let (train_seqs, train_targets) = encode_tweets(train_set, &state.embeddings, max_length, true)?;
    let (dev_seqs, dev_targets) = encode_tweets(dev_set, &state.embeddings, max_length, true)?;

    let mut rng = ChaCha8Rng::seed_from_u64(state.config.seed ^ TRAIN_STREAM);
    let mut order: Vec<usize> = (0..train_seqs.len()).collect();
    let mut history = Vec::with_capacity(state.config.epochs);
    let mut best: Option<(f64, f64, usize, ModelState)> = None;

    for epoch in 1..=state.config.epochs {
        order.shuffle(&mut rng);
        let mut loss_sum = 0.0;
        let mut batches = 0;
        for (b, idx) in order.chunks(state.config.batch_size).enumerate() {
            let batch: Vec<TokenSequence> = idx.iter().map(|&i| train_seqs[i].clone()).collect();
            let targets: Vec<f64> = idx.iter().map(|&i| train_targets[i]).collect();
            let (loss, _, grads) = state.backward(&batch, &targets, Pass::Train(&mut rng))?;
            if !loss.is_finite() || !grads.all_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            state.apply_gradients(&grads);
            if !state.all_finite() {
                return Err(Error::NonFiniteLoss { epoch, batch: b + 1 });
            }
            loss_sum += loss;
            batches += 1;
        }

        let on_train = evaluate_encoded(&state, &train_seqs, &train_targets)?;
        let on_dev = evaluate_encoded(&state, &dev_seqs, &dev_targets)?;
        history.push(EpochRecord {
            epoch,
            train_loss: loss_sum / batches as f64,
            train_accuracy: on_train.accuracy,
            dev_loss: on_dev.loss,
            dev_accuracy: on_dev.accuracy,
            dev_f1: on_dev.f1,
        });

        let better = match &best {
            None => true,
            Some((f1, loss, _, _)) => on_dev.f1 > *f1 || (on_dev.f1 == *f1 && on_dev.loss < *loss),
        };
        if better {
            best = Some((on_dev.f1, on_dev.loss, epoch, state.clone()));
        }
    }

    let (best_epoch, state) = match best {
        Some((_, _, epoch, s)) => (epoch, s),
        None => (0, state),
    };
    Ok(TrainOutcome {
        state,
        history,
        best_epoch,
    })
}

/// Eval-mode probabilities, one per tweet, in input order.
pub fn predict_probabilities(state: &ModelState, tweets: &[Tweet]) -> Result<Vec<Prediction>> {
    let (seqs, _) = encode_tweets(tweets, &state.embeddings, state.config.max_length, false)?;
    let mut out = Vec::with_capacity(seqs.len());
    for chunk in seqs.chunks(EVAL_CHUNK) {
        out.extend(
            state
                .forward(chunk, Pass::Eval)?
                .into_iter()
                .map(Prediction::from_probability),
        );
    }
    Ok(out)
}

pub fn predict(state: &ModelState, tweets: &[Tweet], model_name: &str) -> Result<PredictionSet> {
    let probs = predict_probabilities(state, tweets)?;
    PredictionSet::from_pairs(
        model_name,
        tweets.iter().zip(probs).map(|(t, p)| (t.id.clone(), p.label)),
    )
}
