use ndarray::{Array1, Array2, ArrayViewD, ArrayViewMutD};
use rand::Rng;

use super::ModelConfig;

/// Gate parameters for one GRU direction.
#[derive(Debug, Clone, PartialEq)]
pub struct GruWeights {
    pub w_z: Array2<f64>,
    pub w_r: Array2<f64>,
    pub w_n: Array2<f64>,
    pub u_z: Array2<f64>,
    pub u_r: Array2<f64>,
    pub u_n: Array2<f64>,
    pub b_z: Array1<f64>,
    pub b_r: Array1<f64>,
    pub b_n: Array1<f64>,
}

impl GruWeights {
    fn zeros(input: usize, hidden: usize) -> Self {
        GruWeights {
            w_z: Array2::zeros((hidden, input)),
            w_r: Array2::zeros((hidden, input)),
            w_n: Array2::zeros((hidden, input)),
            u_z: Array2::zeros((hidden, hidden)),
            u_r: Array2::zeros((hidden, hidden)),
            u_n: Array2::zeros((hidden, hidden)),
            b_z: Array1::zeros(hidden),
            b_r: Array1::zeros(hidden),
            b_n: Array1::zeros(hidden),
        }
    }

    fn init<R: Rng>(input: usize, hidden: usize, rng: &mut R) -> Self {
        let mut g = Self::zeros(input, hidden);
        for w in [&mut g.w_z, &mut g.w_r, &mut g.w_n] {
            glorot(w, input, hidden, rng);
        }
        for u in [&mut g.u_z, &mut g.u_r, &mut g.u_n] {
            glorot(u, hidden, hidden, rng);
        }
        g
    }

    fn push_views<'a>(&'a self, prefix: &str, out: &mut Vec<(String, ArrayViewD<'a, f64>)>) {
        let items: [(&str, ArrayViewD<'a, f64>); 9] = [
            ("w_z", self.w_z.view().into_dyn()),
            ("w_r", self.w_r.view().into_dyn()),
            ("w_n", self.w_n.view().into_dyn()),
            ("u_z", self.u_z.view().into_dyn()),
            ("u_r", self.u_r.view().into_dyn()),
            ("u_n", self.u_n.view().into_dyn()),
            ("b_z", self.b_z.view().into_dyn()),
            ("b_r", self.b_r.view().into_dyn()),
            ("b_n", self.b_n.view().into_dyn()),
        ];
        out.extend(items.into_iter().map(|(n, v)| (format!("{prefix}.{n}"), v)));
    }

    fn push_views_mut<'a>(&'a mut self, prefix: &str, out: &mut Vec<(String, ArrayViewMutD<'a, f64>)>) {
        let items: [(&str, ArrayViewMutD<'a, f64>); 9] = [
            ("w_z", self.w_z.view_mut().into_dyn()),
            ("w_r", self.w_r.view_mut().into_dyn()),
            ("w_n", self.w_n.view_mut().into_dyn()),
            ("u_z", self.u_z.view_mut().into_dyn()),
            ("u_r", self.u_r.view_mut().into_dyn()),
            ("u_n", self.u_n.view_mut().into_dyn()),
            ("b_z", self.b_z.view_mut().into_dyn()),
            ("b_r", self.b_r.view_mut().into_dyn()),
            ("b_n", self.b_n.view_mut().into_dyn()),
        ];
        out.extend(items.into_iter().map(|(n, v)| (format!("{prefix}.{n}"), v)));
    }
}

/// Every trainable tensor except the embedding matrix, which lives in the
/// model's [`EmbeddingTable`](crate::embeddings::EmbeddingTable).
#[derive(Debug, Clone, PartialEq)]
pub struct Weights {
    /// `(filters, kernel * dim)`; column `k * dim + d` weighs component `d`
    /// of the `k`-th position in the window.
    pub conv_w: Array2<f64>,
    pub conv_b: Array1<f64>,
    pub gru_fwd: GruWeights,
    pub gru_bwd: GruWeights,
    pub dense_w: Array1<f64>,
    pub dense_b: Array1<f64>,
}

impl Weights {
    pub fn zeros(config: &ModelConfig, dim: usize) -> Self {
        let (f, h) = (config.conv_filters, config.gru_hidden);
        Weights {
            conv_w: Array2::zeros((f, config.conv_kernel * dim)),
            conv_b: Array1::zeros(f),
            gru_fwd: GruWeights::zeros(f, h),
            gru_bwd: GruWeights::zeros(f, h),
            dense_w: Array1::zeros(2 * h),
            dense_b: Array1::zeros(1),
        }
    }

    /// Glorot-uniform weights, zero biases.
    pub fn init<R: Rng>(config: &ModelConfig, dim: usize, rng: &mut R) -> Self {
        let (f, h) = (config.conv_filters, config.gru_hidden);
        let mut conv_w = Array2::zeros((f, config.conv_kernel * dim));
        glorot(&mut conv_w, config.conv_kernel * dim, f, rng);
        let gru_fwd = GruWeights::init(f, h, rng);
        let gru_bwd = GruWeights::init(f, h, rng);
        let mut dense_w = Array1::zeros(2 * h);
        let limit = (6.0 / (2 * h + 1) as f64).sqrt();
        dense_w.mapv_inplace(|_| rng.gen_range(-limit..limit));
        Weights {
            conv_w,
            conv_b: Array1::zeros(f),
            gru_fwd,
            gru_bwd,
            dense_w,
            dense_b: Array1::zeros(1),
        }
    }

    pub fn zeros_like(&self) -> Self {
        let mut z = self.clone();
        for (_, mut t) in z.tensors_mut() {
            t.fill(0.0);
        }
        z
    }

    /// Named views in a fixed order shared by every consumer (optimizer,
    /// checkpoint, gradient checks).
    pub fn tensors(&self) -> Vec<(String, ArrayViewD<'_, f64>)> {
        let mut out = vec![
            ("conv.weight".to_string(), self.conv_w.view().into_dyn()),
            ("conv.bias".to_string(), self.conv_b.view().into_dyn()),
        ];
        self.gru_fwd.push_views("gru_fwd", &mut out);
        self.gru_bwd.push_views("gru_bwd", &mut out);
        out.push(("dense.weight".to_string(), self.dense_w.view().into_dyn()));
        out.push(("dense.bias".to_string(), self.dense_b.view().into_dyn()));
        out
    }

    pub fn tensors_mut(&mut self) -> Vec<(String, ArrayViewMutD<'_, f64>)> {
        let mut out = vec![
            ("conv.weight".to_string(), self.conv_w.view_mut().into_dyn()),
            ("conv.bias".to_string(), self.conv_b.view_mut().into_dyn()),
        ];
        self.gru_fwd.push_views_mut("gru_fwd", &mut out);
        self.gru_bwd.push_views_mut("gru_bwd", &mut out);
        out.push(("dense.weight".to_string(), self.dense_w.view_mut().into_dyn()));
        out.push(("dense.bias".to_string(), self.dense_b.view_mut().into_dyn()));
        out
    }

    /// `self += other`, tensor by tensor.
    pub fn add_assign(&mut self, other: &Weights) {
        for ((_, mut a), (_, b)) in self.tensors_mut().into_iter().zip(other.tensors()) {
            a += &b;
        }
    }

    pub fn all_finite(&self) -> bool {
        self.tensors().iter().all(|(_, t)| t.iter().all(|v| v.is_finite()))
    }

    pub fn parameter_count(&self) -> usize {
        self.tensors().iter().map(|(_, t)| t.len()).sum()
    }
}

fn glorot<R: Rng>(w: &mut Array2<f64>, fan_in: usize, fan_out: usize, rng: &mut R) {
    let limit = (6.0 / (fan_in + fan_out) as f64).sqrt();
    w.mapv_inplace(|_| rng.gen_range(-limit..limit));
}
