use ndarray::{Array2, ArrayViewD, ArrayViewMutD, Zip};

use super::network::Gradients;
use super::params::Weights;
use super::ModelConfig;

/// Adam with bias-corrected moment estimates.
#[derive(Debug, Clone, PartialEq)]
pub struct Adam {
    pub step: u64,
    pub first: Weights,
    pub second: Weights,
    /// Moments for the embedding matrix; present only when it is trained.
    pub embedding_first: Option<Array2<f64>>,
    pub embedding_second: Option<Array2<f64>>,
}

impl Adam {
    pub fn new(weights: &Weights, embedding_shape: Option<(usize, usize)>) -> Self {
        Adam {
            step: 0,
            first: weights.zeros_like(),
            second: weights.zeros_like(),
            embedding_first: embedding_shape.map(Array2::zeros),
            embedding_second: embedding_shape.map(Array2::zeros),
        }
    }

    pub fn update(
        &mut self,
        config: &ModelConfig,
        weights: &mut Weights,
        embedding: Option<&mut Array2<f64>>,
        grads: &Gradients,
    ) {
        self.step += 1;
        let hyper = Hyper::new(config, self.step);

        let params = weights.tensors_mut();
        let g = grads.weights.tensors();
        let m = self.first.tensors_mut();
        let v = self.second.tensors_mut();
        for ((((_, p), (_, g)), (_, m)), (_, v)) in params.into_iter().zip(g).zip(m).zip(v) {
            hyper.apply(p, g, m, v);
        }

        if let (Some(p), Some(g), Some(m), Some(v)) = (
            embedding,
            grads.embedding.as_ref(),
            self.embedding_first.as_mut(),
            self.embedding_second.as_mut(),
        ) {
            // Row 0 is the padding vector and stays exactly zero.
            let mut p = p.slice_mut(ndarray::s![1.., ..]);
            hyper.apply(
                p.view_mut().into_dyn(),
                g.slice(ndarray::s![1.., ..]).into_dyn(),
                m.slice_mut(ndarray::s![1.., ..]).into_dyn(),
                v.slice_mut(ndarray::s![1.., ..]).into_dyn(),
            );
        }
    }
}

struct Hyper {
    lr: f64,
    beta1: f64,
    beta2: f64,
    eps: f64,
    correction1: f64,
    correction2: f64,
}

impl Hyper {
    fn new(config: &ModelConfig, step: u64) -> Self {
        let t = step as i32;
        Hyper {
            lr: config.learning_rate,
            beta1: config.adam_beta1,
            beta2: config.adam_beta2,
            eps: config.adam_epsilon,
            correction1: 1.0 - config.adam_beta1.powi(t),
            correction2: 1.0 - config.adam_beta2.powi(t),
        }
    }

    fn apply(
        &self,
        param: ArrayViewMutD<'_, f64>,
        grad: ArrayViewD<'_, f64>,
        first: ArrayViewMutD<'_, f64>,
        second: ArrayViewMutD<'_, f64>,
    ) {
        Zip::from(param)
            .and(grad)
            .and(first)
            .and(second)
            .for_each(|p, &g, m, v| {
                *m = self.beta1 * *m + (1.0 - self.beta1) * g;
                *v = self.beta2 * *v + (1.0 - self.beta2) * g * g;
                let m_hat = *m / self.correction1;
                let v_hat = *v / self.correction2;
                *p -= self.lr * m_hat / (v_hat.sqrt() + self.eps);
            });
    }
}
