use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, Classifier, LabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::Matrix;
use crate::siamese::{lrelu, lrelu_grad};

const SLOPE: f64 = 0.1;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MlpParams {
    pub hidden: usize,
    pub epochs: usize,
    pub lr: f64,
    pub seed: u64,
}

impl Default for MlpParams {
    fn default() -> Self {
        Self {
            hidden: 100,
            epochs: 30,
            lr: 0.01,
            seed: 0,
        }
    }
}

/// One hidden leaky-ReLU layer and a softmax output, trained with
/// per-sample cross-entropy SGD.
#[derive(Debug, Clone, PartialEq)]
pub struct Mlp {
    classes: Vec<String>,
    pub w_hidden: Matrix,
    pub b_hidden: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

/// Gradients of the cross-entropy of one sample.
#[derive(Debug, Clone, PartialEq)]
pub struct MlpGradients {
    pub w_hidden: Matrix,
    pub b_hidden: Vec<f64>,
    pub w_out: Matrix,
    pub b_out: Vec<f64>,
}

pub fn softmax(logits: &[f64]) -> Vec<f64> {
    let m = logits.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    let exps: Vec<f64> = logits.iter().map(|&l| (l - m).exp()).collect();
    let s: f64 = exps.iter().sum();
    exps.into_iter().map(|e| e / s).collect()
}

impl Mlp {
    /// Glorot-uniform weights, zero biases.
    pub fn init(dim: usize, hidden: usize, classes: Vec<String>, seed: u64) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let k = classes.len();
        let r1 = (6.0 / (dim + hidden) as f64).sqrt();
        let r2 = (6.0 / (hidden + k) as f64).sqrt();
        let w_hidden = Matrix::from_fn(hidden, dim, |_, _| rng.random_range(-r1..=r1));
        let w_out = Matrix::from_fn(k, hidden, |_, _| rng.random_range(-r2..=r2));
        Self {
            classes,
            w_hidden,
            b_hidden: vec![0.0; hidden],
            w_out,
            b_out: vec![0.0; k],
        }
    }

    pub fn fit(train: &LabeledDataset, params: MlpParams) -> Result<Self> {
        if train.classes().len() < 2 {
            return Err(Error::InvalidArgument("MLP needs at least two classes".into()));
        }
        if params.hidden == 0 || !(params.lr > 0.0) {
            return Err(Error::InvalidArgument("MLP needs hidden ≥ 1 and a positive learning rate".into()));
        }
        let mut model = Self::init(train.dim(), params.hidden, train.classes().to_vec(), params.seed);
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed.wrapping_add(1));
        let mut order: Vec<usize> = (0..train.len()).collect();
        for epoch in 0..params.epochs {
            order.shuffle(&mut rng);
            let mut total = 0.0;
            for &i in &order {
                let (loss, g) = model.loss_and_gradients(train.row(i), train.class_indices()[i]);
                if !loss.is_finite() {
                    return Err(Error::Numeric(format!("MLP loss became non-finite in epoch {epoch}")));
                }
                total += loss;
                model.step(&g, params.lr);
            }
            log::trace!("mlp epoch {epoch}: mean loss {}", total / train.len() as f64);
        }
        Ok(model)
    }

    fn hidden_pre(&self, x: &[f64]) -> Vec<f64> {
        let mut u = self.w_hidden.matvec(x);
        u.iter_mut().zip(&self.b_hidden).for_each(|(a, b)| *a += b);
        u
    }

    pub fn probabilities(&self, x: &[f64]) -> Vec<f64> {
        let h: Vec<f64> = self.hidden_pre(x).iter().map(|&u| lrelu(u, SLOPE)).collect();
        let mut logits = self.w_out.matvec(&h);
        logits.iter_mut().zip(&self.b_out).for_each(|(a, b)| *a += b);
        softmax(&logits)
    }

    /// Cross-entropy `-ln p[class]` and its exact gradients.
    pub fn loss_and_gradients(&self, x: &[f64], class: usize) -> (f64, MlpGradients) {
        let u = self.hidden_pre(x);
        let h: Vec<f64> = u.iter().map(|&v| lrelu(v, SLOPE)).collect();
        let mut logits = self.w_out.matvec(&h);
        logits.iter_mut().zip(&self.b_out).for_each(|(a, b)| *a += b);
        let p = softmax(&logits);
        let loss = -p[class].ln();

        let mut d_logits = p;
        d_logits[class] -= 1.0;
        let mut w_out = Matrix::zeros(self.w_out.rows(), self.w_out.cols());
        w_out.add_outer(1.0, &d_logits, &h);
        let d_h = self.w_out.matvec_t(&d_logits);
        let d_u: Vec<f64> = d_h.iter().zip(&u).map(|(g, &v)| g * lrelu_grad(v, SLOPE)).collect();
        let mut w_hidden = Matrix::zeros(self.w_hidden.rows(), self.w_hidden.cols());
        w_hidden.add_outer(1.0, &d_u, x);
        (
            loss,
            MlpGradients {
                w_hidden,
                b_hidden: d_u,
                w_out,
                b_out: d_logits,
            },
        )
    }

    fn step(&mut self, g: &MlpGradients, lr: f64) {
        let pairs = [
            (self.w_hidden.as_mut_slice(), g.w_hidden.as_slice()),
            (self.w_out.as_mut_slice(), g.w_out.as_slice()),
            (self.b_hidden.as_mut_slice(), g.b_hidden.as_slice()),
            (self.b_out.as_mut_slice(), g.b_out.as_slice()),
        ];
        for (p, d) in pairs {
            p.iter_mut().zip(d).for_each(|(a, b)| *a -= lr * b);
        }
    }
}

impl Classifier for Mlp {
    fn predict(&self, x: &[f64]) -> &str {
        &self.classes[argmax(&self.probabilities(x))]
    }
}
