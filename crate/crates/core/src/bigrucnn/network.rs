//! Forward and backward passes for a single sequence, plus batch wrappers.
//!
//! Only the first `valid_length` positions of a sequence take part in the
//! computation. Padding embeds to the zero vector, which is exactly what the
//! convolution's zero padding supplies at the right edge, and the GRU carries
//! its state unchanged across padded steps, so truncating the sequence is the
//! same computation as masking it.

use ndarray::{s, Array1, Array2, Axis};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::params::{GruWeights, Weights};
use super::ModelState;
use crate::embeddings::PAD;
use crate::error::{Error, Result};
use crate::preprocess::TokenSequence;

/// Dropout switch for a pass. `Train` draws masks from the given generator.
pub enum Pass<'a> {
    Eval,
    Train(&'a mut ChaCha8Rng),
}

/// Gradients for one batch: dense weights plus, when embeddings are
/// trainable, a full-size embedding gradient.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub weights: Weights,
    pub embedding: Option<Array2<f64>>,
}

impl Gradients {
    pub fn all_finite(&self) -> bool {
        self.weights.all_finite()
            && self
                .embedding
                .as_ref()
                .is_none_or(|e| e.iter().all(|v| v.is_finite()))
    }
}

pub(crate) fn sigmoid(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// Binary cross-entropy of a logit, computed without forming `ln p`.
pub(crate) fn bce_with_logit(logit: f64, target: f64) -> f64 {
    logit.max(0.0) - logit * target + (-logit.abs()).exp().ln_1p()
}

/// Mean binary cross-entropy over paired probabilities and 0/1 targets.
pub fn loss(probabilities: &[f64], targets: &[f64]) -> Result<f64> {
    if probabilities.len() != targets.len() {
        return Err(Error::LengthMismatch {
            left: probabilities.len(),
            right: targets.len(),
        });
    }
    if probabilities.is_empty() {
        return Ok(0.0);
    }
    let total: f64 = probabilities
        .iter()
        .zip(targets)
        .map(|(&p, &t)| -(t * p.ln() + (1.0 - t) * (-p).ln_1p()))
        .sum();
    Ok(total / probabilities.len() as f64)
}

struct DropoutMasks {
    embedding: Option<Array2<f64>>,
    pooled: Option<Array1<f64>>,
}

impl DropoutMasks {
    fn none() -> Self {
        DropoutMasks {
            embedding: None,
            pooled: None,
        }
    }

    fn draw(rate: f64, len: usize, dim: usize, pooled: usize, seed: u64) -> Self {
        if rate == 0.0 {
            return Self::none();
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let keep = 1.0 / (1.0 - rate);
        let mut sample = |v: &mut f64| *v = if rng.gen::<f64>() < rate { 0.0 } else { keep };
        let mut embedding = Array2::zeros((len, dim));
        embedding.map_inplace(&mut sample);
        let mut pooled_mask = Array1::zeros(pooled);
        pooled_mask.map_inplace(&mut sample);
        DropoutMasks {
            embedding: Some(embedding),
            pooled: Some(pooled_mask),
        }
    }
}

/// Hidden states and gate activations of one GRU direction, in processing
/// order.
struct GruTrace {
    inputs: Array2<f64>,
    /// `len + 1` rows; row 0 is the zero initial state.
    states: Array2<f64>,
    z: Array2<f64>,
    r: Array2<f64>,
    n: Array2<f64>,
}

fn gru_forward(g: &GruWeights, inputs: Array2<f64>) -> GruTrace {
    let len = inputs.nrows();
    let hidden = g.b_z.len();
    let xz = inputs.dot(&g.w_z.t()) + &g.b_z;
    let xr = inputs.dot(&g.w_r.t()) + &g.b_r;
    let xn = inputs.dot(&g.w_n.t()) + &g.b_n;
    let mut states = Array2::zeros((len + 1, hidden));
    let mut z = Array2::zeros((len, hidden));
    let mut r = Array2::zeros((len, hidden));
    let mut n = Array2::zeros((len, hidden));
    for step in 0..len {
        let prev = states.row(step).to_owned();
        let zt = (&xz.row(step) + &g.u_z.dot(&prev)).mapv(sigmoid);
        let rt = (&xr.row(step) + &g.u_r.dot(&prev)).mapv(sigmoid);
        let nt = (&xn.row(step) + &g.u_n.dot(&(&rt * &prev))).mapv(f64::tanh);
        let ht = &nt + &(&zt * &(&prev - &nt));
        states.row_mut(step + 1).assign(&ht);
        z.row_mut(step).assign(&zt);
        r.row_mut(step).assign(&rt);
        n.row_mut(step).assign(&nt);
    }
    GruTrace {
        inputs,
        states,
        z,
        r,
        n,
    }
}

/// Backpropagates `d_out` (gradient w.r.t. each produced state, processing
/// order) through one direction. Accumulates into `grad` and returns the
/// gradient w.r.t. the inputs.
fn gru_backward(g: &GruWeights, trace: &GruTrace, d_out: &Array2<f64>, grad: &mut GruWeights) -> Array2<f64> {
    let len = trace.inputs.nrows();
    let hidden = g.b_z.len();
    let mut dz_pre = Array2::zeros((len, hidden));
    let mut dr_pre = Array2::zeros((len, hidden));
    let mut dn_pre = Array2::zeros((len, hidden));
    let mut reset_prev = Array2::zeros((len, hidden));
    let mut carry = Array1::<f64>::zeros(hidden);

    for step in (0..len).rev() {
        let prev = trace.states.row(step);
        let (zt, rt, nt) = (trace.z.row(step), trace.r.row(step), trace.n.row(step));
        let dh = &d_out.row(step) + &carry;

        let dn = &dh * &zt.mapv(|v| 1.0 - v);
        let dz = &dh * &(&prev - &nt);
        let dnp = &dn * &nt.mapv(|v| 1.0 - v * v);
        let dzp = &dz * &zt.mapv(|v| v * (1.0 - v));
        let d_reset_prev = g.u_n.t().dot(&dnp);
        let dr = &d_reset_prev * &prev;
        let drp = &dr * &rt.mapv(|v| v * (1.0 - v));

        carry = &dh * &zt + &(&d_reset_prev * &rt) + g.u_z.t().dot(&dzp) + g.u_r.t().dot(&drp);

        reset_prev.row_mut(step).assign(&(&rt * &prev));
        dz_pre.row_mut(step).assign(&dzp);
        dr_pre.row_mut(step).assign(&drp);
        dn_pre.row_mut(step).assign(&dnp);
    }

    let prev_states = trace.states.slice(s![..len, ..]);
    grad.w_z += &dz_pre.t().dot(&trace.inputs);
    grad.w_r += &dr_pre.t().dot(&trace.inputs);
    grad.w_n += &dn_pre.t().dot(&trace.inputs);
    grad.u_z += &dz_pre.t().dot(&prev_states);
    grad.u_r += &dr_pre.t().dot(&prev_states);
    grad.u_n += &dn_pre.t().dot(&reset_prev);
    grad.b_z += &dz_pre.sum_axis(Axis(0));
    grad.b_r += &dr_pre.sum_axis(Axis(0));
    grad.b_n += &dn_pre.sum_axis(Axis(0));

    dz_pre.dot(&g.w_z) + dr_pre.dot(&g.w_r) + dn_pre.dot(&g.w_n)
}

fn reversed_rows(a: &Array2<f64>) -> Array2<f64> {
    a.slice(s![..;-1, ..]).to_owned()
}

/// Loss, probability, weight gradients and embedding-row gradients of one example.
type ExampleGrad = (f64, f64, Weights, Vec<(usize, Array1<f64>)>);

/// Everything the backward pass needs from one forward pass.
struct Trace {
    tokens: Vec<usize>,
    masks: DropoutMasks,
    cols: Array2<f64>,
    conv_pre: Array2<f64>,
    fwd: GruTrace,
    bwd: GruTrace,
    /// Winning time step per pooled feature; `None` for empty sequences.
    argmax: Vec<Option<usize>>,
    head_input: Array1<f64>,
    logit: f64,
}

impl ModelState {
    pub(crate) fn check_sequence(&self, seq: &TokenSequence) -> Result<()> {
        if seq.max_length != self.config.max_length || seq.tokens.len() != self.config.max_length {
            return Err(Error::Shape(format!(
                "sequence of length {} (cap {}) does not match model max_length {}",
                seq.tokens.len(),
                seq.max_length,
                self.config.max_length
            )));
        }
        let vocab = self.embeddings.len();
        if let Some(&bad) = seq.tokens[..seq.valid_length()].iter().find(|&&t| t >= vocab) {
            return Err(Error::Shape(format!(
                "token index {bad} outside vocabulary of {vocab}"
            )));
        }
        Ok(())
    }

    fn trace(&self, seq: &TokenSequence, masks: DropoutMasks) -> Trace {
        let w = &self.weights;
        let dim = self.embeddings.dim();
        let kernel = self.config.conv_kernel;
        let left = (kernel - 1) / 2;
        let hidden = self.config.gru_hidden;
        let len = seq.valid_length();
        let tokens = seq.tokens[..len].to_vec();

        let mut x = Array2::zeros((len, dim));
        for (t, &tok) in tokens.iter().enumerate() {
            x.row_mut(t).assign(&self.embeddings.vector(tok));
        }
        if let Some(m) = &masks.embedding {
            x *= m;
        }

        // im2col with zero padding: window k of output t reads input t + k - left.
        let mut cols = Array2::zeros((len, kernel * dim));
        for t in 0..len {
            for k in 0..kernel {
                let src = t + k;
                if src < left || src - left >= len {
                    continue;
                }
                cols.slice_mut(s![t, k * dim..(k + 1) * dim])
                    .assign(&x.row(src - left));
            }
        }
        let conv_pre = cols.dot(&w.conv_w.t()) + &w.conv_b;
        let act = conv_pre.mapv(|v| v.max(0.0));

        let bwd_inputs = reversed_rows(&act);
        let fwd = gru_forward(&w.gru_fwd, act);
        let bwd = gru_forward(&w.gru_bwd, bwd_inputs);

        let mut pooled = Array1::zeros(2 * hidden);
        let mut argmax = vec![None; 2 * hidden];
        if len > 0 {
            for j in 0..hidden {
                let (mut best_t, mut best_v) = (0, f64::NEG_INFINITY);
                let (mut best_tb, mut best_vb) = (0, f64::NEG_INFINITY);
                for t in 0..len {
                    let v = fwd.states[[t + 1, j]];
                    if v > best_v {
                        (best_t, best_v) = (t, v);
                    }
                    let vb = bwd.states[[len - t, j]];
                    if vb > best_vb {
                        (best_tb, best_vb) = (t, vb);
                    }
                }
                pooled[j] = best_v;
                argmax[j] = Some(best_t);
                pooled[hidden + j] = best_vb;
                argmax[hidden + j] = Some(best_tb);
            }
        }
        let head_input = match &masks.pooled {
            Some(m) => &pooled * m,
            None => pooled,
        };
        let logit = w.dense_w.dot(&head_input) + w.dense_b[0];
        Trace {
            tokens,
            masks,
            cols,
            conv_pre,
            fwd,
            bwd,
            argmax,
            head_input,
            logit,
        }
    }

    /// Accumulates the gradient of `scale * bce(logit, target)` into `grad`
    /// and, for trainable embeddings, returns per-position embedding rows.
    fn backprop(&self, trace: &Trace, d_logit: f64, grad: &mut Weights) -> Vec<(usize, Array1<f64>)> {
        let w = &self.weights;
        let dim = self.embeddings.dim();
        let kernel = self.config.conv_kernel;
        let left = (kernel - 1) / 2;
        let hidden = self.config.gru_hidden;
        let len = trace.tokens.len();

        grad.dense_w.scaled_add(d_logit, &trace.head_input);
        grad.dense_b[0] += d_logit;
        if len == 0 {
            return Vec::new();
        }

        let mut d_pooled = &w.dense_w * d_logit;
        if let Some(m) = &trace.masks.pooled {
            d_pooled *= m;
        }
        // Route pooled gradients to the winning steps, in each direction's
        // processing order.
        let mut d_fwd = Array2::zeros((len, hidden));
        let mut d_bwd = Array2::zeros((len, hidden));
        for j in 0..hidden {
            if let Some(t) = trace.argmax[j] {
                d_fwd[[t, j]] += d_pooled[j];
            }
            if let Some(t) = trace.argmax[hidden + j] {
                d_bwd[[len - 1 - t, j]] += d_pooled[hidden + j];
            }
        }

        let d_act_fwd = gru_backward(&w.gru_fwd, &trace.fwd, &d_fwd, &mut grad.gru_fwd);
        let d_act_bwd = gru_backward(&w.gru_bwd, &trace.bwd, &d_bwd, &mut grad.gru_bwd);
        let mut d_conv = d_act_fwd + reversed_rows(&d_act_bwd);
        d_conv.zip_mut_with(&trace.conv_pre, |d, &pre| {
            if pre <= 0.0 {
                *d = 0.0;
            }
        });

        grad.conv_w += &d_conv.t().dot(&trace.cols);
        grad.conv_b += &d_conv.sum_axis(Axis(0));

        if !self.config.trainable_embeddings {
            return Vec::new();
        }
        let d_cols = d_conv.dot(&w.conv_w);
        let mut d_x = Array2::<f64>::zeros((len, dim));
        for t in 0..len {
            for k in 0..kernel {
                let src = t + k;
                if src < left || src - left >= len {
                    continue;
                }
                let mut row = d_x.row_mut(src - left);
                row += &d_cols.slice(s![t, k * dim..(k + 1) * dim]);
            }
        }
        if let Some(m) = &trace.masks.embedding {
            d_x *= m;
        }
        trace
            .tokens
            .iter()
            .zip(d_x.rows())
            .filter(|(&tok, _)| tok != PAD)
            .map(|(&tok, row)| (tok, row.to_owned()))
            .collect()
    }

    fn draw_masks(&self, batch: &[TokenSequence], pass: Pass<'_>) -> Vec<DropoutMasks> {
        match pass {
            Pass::Eval => batch.iter().map(|_| DropoutMasks::none()).collect(),
            Pass::Train(rng) => {
                // Per-example seeds are drawn up front so results do not
                // depend on how examples are scheduled across threads.
                let seeds: Vec<u64> = batch.iter().map(|_| rng.gen()).collect();
                batch
                    .iter()
                    .zip(seeds)
                    .map(|(seq, seed)| {
                        DropoutMasks::draw(
                            self.config.dropout,
                            seq.valid_length(),
                            self.embeddings.dim(),
                            2 * self.config.gru_hidden,
                            seed,
                        )
                    })
                    .collect()
            }
        }
    }

    /// Logits for a batch.
    pub fn logits(&self, batch: &[TokenSequence], pass: Pass<'_>) -> Result<Vec<f64>> {
        for seq in batch {
            self.check_sequence(seq)?;
        }
        let masks = self.draw_masks(batch, pass);
        Ok(batch
            .par_iter()
            .zip(masks)
            .map(|(seq, m)| self.trace(seq, m).logit)
            .collect())
    }

    /// Probability of INFORMATIVE for each sequence.
    pub fn forward(&self, batch: &[TokenSequence], pass: Pass<'_>) -> Result<Vec<f64>> {
        Ok(self.logits(batch, pass)?.into_iter().map(sigmoid).collect())
    }

    /// Max-pooled Bi-GRU features (the dense head's input) in eval mode.
    /// The first half comes from the forward direction.
    pub fn features(&self, seq: &TokenSequence) -> Result<Array1<f64>> {
        self.check_sequence(seq)?;
        Ok(self.trace(seq, DropoutMasks::none()).head_input)
    }

    /// Mean binary cross-entropy of a batch.
    pub fn batch_loss(&self, batch: &[TokenSequence], targets: &[f64], pass: Pass<'_>) -> Result<f64> {
        if batch.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: batch.len(),
                right: targets.len(),
            });
        }
        let logits = self.logits(batch, pass)?;
        if logits.is_empty() {
            return Ok(0.0);
        }
        let total: f64 = logits
            .iter()
            .zip(targets)
            .map(|(&l, &t)| bce_with_logit(l, t))
            .sum();
        Ok(total / logits.len() as f64)
    }

    /// Loss, probabilities and gradients of the mean batch loss.
    pub fn backward(
        &self,
        batch: &[TokenSequence],
        targets: &[f64],
        pass: Pass<'_>,
    ) -> Result<(f64, Vec<f64>, Gradients)> {
        if batch.len() != targets.len() {
            return Err(Error::LengthMismatch {
                left: batch.len(),
                right: targets.len(),
            });
        }
        for seq in batch {
            self.check_sequence(seq)?;
        }
        let masks = self.draw_masks(batch, pass);
        let scale = 1.0 / batch.len().max(1) as f64;

        let per_example: Vec<ExampleGrad> = batch
            .par_iter()
            .zip(masks)
            .zip(targets.par_iter())
            .map(|((seq, m), &target)| {
                let trace = self.trace(seq, m);
                let p = sigmoid(trace.logit);
                let mut grad = self.weights.zeros_like();
                let rows = self.backprop(&trace, (p - target) * scale, &mut grad);
                (bce_with_logit(trace.logit, target), p, grad, rows)
            })
            .collect();

        // Fixed-order reduction keeps results independent of thread count.
        let mut total = self.weights.zeros_like();
        let mut embedding = self
            .config
            .trainable_embeddings
            .then(|| Array2::zeros(self.embeddings.matrix().raw_dim()));
        let mut loss_sum = 0.0;
        let mut probs = Vec::with_capacity(batch.len());
        for (l, p, grad, rows) in per_example {
            loss_sum += l;
            probs.push(p);
            total.add_assign(&grad);
            if let Some(e) = embedding.as_mut() {
                for (tok, row) in rows {
                    let mut dst = e.row_mut(tok);
                    dst += &row;
                }
            }
        }
        Ok((
            loss_sum * scale,
            probs,
            Gradients {
                weights: total,
                embedding,
            },
        ))
    }
}
