//! Weight-tied Siamese perceptron scoring document relevance.
//!
//! Both branches map a document vector `x` (length D) through the single
//! shared layer `h = act(W1·x + b1)` (length H). The two embeddings are
//! concatenated, passed through the combination layer
//! `z = lrelu(W21·[ha; hb] + b21)` (length C) and scored by
//! `tanh(W22·z + b22)`. Training minimises the squared error against a 0/1
//! relevance target by per-pair SGD; the shared-layer step is the mean of the
//! two branch gradients.

mod model_io;
mod train;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::{DocVector, FeatureKind, FeatureMatrix};
use crate::linalg::{dot, Matrix};

pub use model_io::{read_model, write_model, ModelHeader};
pub use train::{train, StopReason, TraceRecord, TrainTrace};

/// `max(ε·x, x)`.
#[inline]
pub fn lrelu(x: f64, epsilon: f64) -> f64 {
    if x > 0.0 {
        x
    } else {
        epsilon * x
    }
}

/// Derivative of [`lrelu`]; the slope at 0 is taken as ε.
#[inline]
pub fn lrelu_grad(x: f64, epsilon: f64) -> f64 {
    if x > 0.0 {
        1.0
    } else {
        epsilon
    }
}

/// `lr0 / (1 + i / s)` with `i` counting pair updates.
pub fn lrate(i: usize, config: &TrainConfig) -> f64 {
    config.lr0 / (1.0 + i as f64 / config.decay_horizon)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Activation {
    LeakyRelu,
    Tanh,
    Identity,
}

impl Activation {
    #[inline]
    fn apply(self, x: f64, epsilon: f64) -> f64 {
        match self {
            Activation::LeakyRelu => lrelu(x, epsilon),
            Activation::Tanh => x.tanh(),
            Activation::Identity => x,
        }
    }

    #[inline]
    fn grad(self, x: f64, epsilon: f64) -> f64 {
        match self {
            Activation::LeakyRelu => lrelu_grad(x, epsilon),
            Activation::Tanh => 1.0 - x.tanh().powi(2),
            Activation::Identity => 1.0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub lr0: f64,
    /// Iterations over which the learning rate halves.
    pub decay_horizon: f64,
    /// Leaky-ReLU negative slope.
    pub epsilon: f64,
    pub dropout_p: f64,
    pub init_range: f64,
    pub max_iters: usize,
    pub eval_every: usize,
    pub patience: usize,
    pub seed: u64,
    pub use_bias: bool,
    pub subnet_activation: Activation,
    /// Training pairs scored (without dropout) for the trace's train MSE.
    pub train_probe: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        Self {
            lr0: 0.0005,
            decay_horizon: 100.0,
            epsilon: 0.1,
            dropout_p: 0.5,
            init_range: 0.01,
            max_iters: 400_000,
            eval_every: 1000,
            patience: 5,
            seed: 0,
            use_bias: true,
            subnet_activation: Activation::LeakyRelu,
            train_probe: 1000,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.lr0 > 0.0) {
            return Err(Error::InvalidArgument(format!("lr0 must be positive, got {}", self.lr0)));
        }
        if !(self.decay_horizon > 0.0) {
            return Err(Error::InvalidArgument("decay horizon s must be positive".into()));
        }
        if !(0.0..1.0).contains(&self.dropout_p) {
            return Err(Error::InvalidArgument(format!("dropout_p must lie in [0, 1), got {}", self.dropout_p)));
        }
        if !(0.0..1.0).contains(&self.epsilon) {
            return Err(Error::InvalidArgument(format!("epsilon must lie in [0, 1), got {}", self.epsilon)));
        }
        if self.eval_every == 0 {
            return Err(Error::InvalidArgument("eval_every must be at least 1".into()));
        }
        if !(self.init_range >= 0.0) {
            return Err(Error::InvalidArgument("init_range must be non-negative".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SiameseParams {
    /// `H × D`, shared by both branches.
    pub w1: Matrix,
    pub b1: Vec<f64>,
    /// `C × 2H` over `[ha; hb]`.
    pub w21: Matrix,
    pub b21: Vec<f64>,
    /// Output weights, length C.
    pub w22: Vec<f64>,
    pub b22: f64,
    pub epsilon: f64,
    pub subnet_activation: Activation,
}

impl SiameseParams {
    /// Weights uniform on `[-init_range, init_range]`, biases zero.
    pub fn init(input_dim: usize, hidden: usize, combination: usize, config: &TrainConfig) -> Result<Self> {
        if input_dim == 0 || hidden == 0 || combination == 0 {
            return Err(Error::InvalidArgument("network dimensions must be at least 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
        let r = config.init_range;
        let mut uniform = |_: usize, _: usize| if r > 0.0 { rng.random_range(-r..=r) } else { 0.0 };
        let w1 = Matrix::from_fn(hidden, input_dim, &mut uniform);
        let w21 = Matrix::from_fn(combination, 2 * hidden, &mut uniform);
        let w22 = (0..combination).map(|c| uniform(0, c)).collect();
        Ok(Self {
            w1,
            b1: vec![0.0; hidden],
            w21,
            b21: vec![0.0; combination],
            w22,
            b22: 0.0,
            epsilon: config.epsilon,
            subnet_activation: config.subnet_activation,
        })
    }

    pub fn input_dim(&self) -> usize {
        self.w1.cols()
    }

    pub fn hidden_dim(&self) -> usize {
        self.w1.rows()
    }

    pub fn combination_dim(&self) -> usize {
        self.w21.rows()
    }

    pub fn is_finite(&self) -> bool {
        self.w1.is_finite()
            && self.w21.is_finite()
            && self.b1.iter().chain(&self.b21).chain(&self.w22).all(|v| v.is_finite())
            && self.b22.is_finite()
    }

    fn check_input(&self, x: &[f64]) -> Result<()> {
        if x.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: x.len(),
            });
        }
        Ok(())
    }

    /// Pre-activation `W1·x + b1` of the shared layer.
    fn subnet_pre(&self, x: &[f64]) -> Vec<f64> {
        let mut u = self.w1.matvec(x);
        for (ui, bi) in u.iter_mut().zip(&self.b1) {
            *ui += bi;
        }
        u
    }

    /// Shared sub-network embedding, with optional inverted dropout.
    pub fn subnet_forward(&self, x: &[f64], mask: Option<&DropoutMask>) -> Result<Vec<f64>> {
        self.check_input(x)?;
        let u = self.subnet_pre(x);
        Ok(self.subnet_activate(&u, mask))
    }

    fn subnet_activate(&self, u: &[f64], mask: Option<&DropoutMask>) -> Vec<f64> {
        let mut h: Vec<f64> = u
            .iter()
            .map(|&v| self.subnet_activation.apply(v, self.epsilon))
            .collect();
        if let Some(m) = mask {
            m.apply(&mut h);
        }
        h
    }

    pub fn forward(&self, xa: &[f64], xb: &[f64], masks: Option<&BranchMasks>) -> Result<ForwardPass> {
        self.check_input(xa)?;
        self.check_input(xb)?;
        Ok(self.forward_unchecked(xa, xb, masks))
    }

    fn forward_unchecked(&self, xa: &[f64], xb: &[f64], masks: Option<&BranchMasks>) -> ForwardPass {
        let ua = self.subnet_pre(xa);
        let ub = self.subnet_pre(xb);
        let ha = self.subnet_activate(&ua, masks.map(|m| &m.a));
        let hb = self.subnet_activate(&ub, masks.map(|m| &m.b));
        let h = ha.len();
        let mut v = self.b21.clone();
        for (c, vc) in v.iter_mut().enumerate() {
            let row = self.w21.row(c);
            *vc += dot(&row[..h], &ha) + dot(&row[h..], &hb);
        }
        let z: Vec<f64> = v.iter().map(|&x| lrelu(x, self.epsilon)).collect();
        let score = (dot(&self.w22, &z) + self.b22).tanh();
        ForwardPass {
            ua,
            ub,
            ha,
            hb,
            v,
            z,
            score,
        }
    }

    /// Relevancy score without dropout.
    pub fn score(&self, xa: &[f64], xb: &[f64]) -> Result<f64> {
        Ok(self.forward(xa, xb, None)?.score)
    }

    /// Backpropagate the squared error `(score - target)²` of one pair.
    pub fn backward(&self, xa: &[f64], xb: &[f64], target: f64, masks: Option<&BranchMasks>) -> Result<Gradients> {
        self.check_input(xa)?;
        self.check_input(xb)?;
        let fwd = self.forward_unchecked(xa, xb, masks);
        let deltas = self.deltas(&fwd, target, masks);
        Ok(Gradients::from_deltas(&deltas, &fwd, xa, xb))
    }

    fn deltas(&self, fwd: &ForwardPass, target: f64, masks: Option<&BranchMasks>) -> Deltas {
        let s = fwd.score;
        let d_out = 2.0 * (s - target) * (1.0 - s * s);
        let d_comb: Vec<f64> = fwd
            .v
            .iter()
            .zip(&self.w22)
            .map(|(&v, &w)| d_out * w * lrelu_grad(v, self.epsilon))
            .collect();
        let d_concat = self.w21.matvec_t(&d_comb);
        let h = self.hidden_dim();
        let branch = |d_h: &[f64], u: &[f64], mask: Option<&DropoutMask>| -> Vec<f64> {
            d_h.iter()
                .zip(u)
                .enumerate()
                .map(|(i, (&g, &ui))| {
                    let keep = mask.map_or(1.0, |m| m.factor(i));
                    g * keep * self.subnet_activation.grad(ui, self.epsilon)
                })
                .collect()
        };
        let d_subnet_a = branch(&d_concat[..h], &fwd.ua, masks.map(|m| &m.a));
        let d_subnet_b = branch(&d_concat[h..], &fwd.ub, masks.map(|m| &m.b));
        Deltas {
            d_out,
            d_comb,
            d_subnet_a,
            d_subnet_b,
        }
    }

    /// One SGD step on a pair, returning the pre-update squared error.
    ///
    /// The shared layer moves by the mean of the two branch gradients.
    pub fn sgd_step(&mut self, xa: &[f64], xb: &[f64], target: f64, masks: Option<&BranchMasks>, lr: f64, use_bias: bool) -> f64 {
        let fwd = self.forward_unchecked(xa, xb, masks);
        let loss = (fwd.score - target).powi(2);
        let d = self.deltas(&fwd, target, masks);

        let h = self.hidden_dim();
        for (c, &dc) in d.d_comb.iter().enumerate() {
            if dc == 0.0 {
                continue;
            }
            let row = self.w21.row_mut(c);
            for (w, &x) in row[..h].iter_mut().zip(&fwd.ha) {
                *w -= lr * dc * x;
            }
            for (w, &x) in row[h..].iter_mut().zip(&fwd.hb) {
                *w -= lr * dc * x;
            }
        }
        for (w, &zc) in self.w22.iter_mut().zip(&fwd.z) {
            *w -= lr * d.d_out * zc;
        }
        let half = 0.5 * lr;
        self.w1.add_outer(-half, &d.d_subnet_a, xa);
        self.w1.add_outer(-half, &d.d_subnet_b, xb);
        if use_bias {
            self.b22 -= lr * d.d_out;
            for (b, &dc) in self.b21.iter_mut().zip(&d.d_comb) {
                *b -= lr * dc;
            }
            for ((b, &ga), &gb) in self.b1.iter_mut().zip(&d.d_subnet_a).zip(&d.d_subnet_b) {
                *b -= half * (ga + gb);
            }
        }
        loss
    }

    /// Apply `param -= lr · update` using materialised gradients.
    pub fn apply_gradients(&mut self, g: &Gradients, lr: f64, use_bias: bool) {
        let w1 = g.shared_w1_update();
        for (p, u) in self.w1.as_mut_slice().iter_mut().zip(w1.as_slice()) {
            *p -= lr * u;
        }
        for (p, u) in self.w21.as_mut_slice().iter_mut().zip(g.w21.as_slice()) {
            *p -= lr * u;
        }
        for (p, u) in self.w22.iter_mut().zip(&g.w22) {
            *p -= lr * u;
        }
        if use_bias {
            for (p, u) in self.b1.iter_mut().zip(g.shared_b1_update()) {
                *p -= lr * u;
            }
            for (p, u) in self.b21.iter_mut().zip(&g.b21) {
                *p -= lr * u;
            }
            self.b22 -= lr * g.b22;
        }
    }

    /// Deep representation of every row (no dropout).
    pub fn embed(&self, features: &FeatureMatrix) -> Result<FeatureMatrix> {
        use rayon::prelude::*;
        if features.dim() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: features.dim(),
            });
        }
        let rows: Vec<DocVector> = (0..features.len())
            .into_par_iter()
            .map(|r| {
                let u = self.subnet_pre(features.row(r));
                self.subnet_activate(&u, None)
            })
            .collect();
        FeatureMatrix::from_rows(FeatureKind::Deep, features.doc_ids().to_vec(), rows, self.hidden_dim())
    }
}

/// Unit dropout mask for one branch's hidden layer.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMask {
    pub keep: Vec<bool>,
    /// Survivor scaling `1 / (1 - p)`.
    pub scale: f64,
}

impl DropoutMask {
    pub fn all_kept(len: usize, p: f64) -> Self {
        Self {
            keep: vec![true; len],
            scale: 1.0 / (1.0 - p),
        }
    }

    pub fn sample(len: usize, p: f64, rng: &mut impl Rng) -> Self {
        Self {
            keep: (0..len).map(|_| rng.random::<f64>() >= p).collect(),
            scale: 1.0 / (1.0 - p),
        }
    }

    #[inline]
    fn factor(&self, i: usize) -> f64 {
        if self.keep[i] {
            self.scale
        } else {
            0.0
        }
    }

    fn apply(&self, h: &mut [f64]) {
        for (i, v) in h.iter_mut().enumerate() {
            *v *= self.factor(i);
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BranchMasks {
    pub a: DropoutMask,
    pub b: DropoutMask,
}

/// Intermediate values of one forward pass.
#[derive(Debug, Clone, PartialEq)]
pub struct ForwardPass {
    pub ua: Vec<f64>,
    pub ub: Vec<f64>,
    pub ha: Vec<f64>,
    pub hb: Vec<f64>,
    pub v: Vec<f64>,
    pub z: Vec<f64>,
    pub score: f64,
}

struct Deltas {
    d_out: f64,
    d_comb: Vec<f64>,
    d_subnet_a: Vec<f64>,
    d_subnet_b: Vec<f64>,
}

/// Per-pair gradients. The shared layer keeps one gradient per branch;
/// their sum is the derivative of the loss with respect to the tied
/// weights and their mean is the step actually applied.
#[derive(Debug, Clone, PartialEq)]
pub struct Gradients {
    pub w1_a: Matrix,
    pub w1_b: Matrix,
    pub b1_a: Vec<f64>,
    pub b1_b: Vec<f64>,
    pub w21: Matrix,
    pub b21: Vec<f64>,
    pub w22: Vec<f64>,
    pub b22: f64,
}

impl Gradients {
    fn from_deltas(d: &Deltas, fwd: &ForwardPass, xa: &[f64], xb: &[f64]) -> Self {
        let h = d.d_subnet_a.len();
        let mut w1_a = Matrix::zeros(h, xa.len());
        w1_a.add_outer(1.0, &d.d_subnet_a, xa);
        let mut w1_b = Matrix::zeros(h, xb.len());
        w1_b.add_outer(1.0, &d.d_subnet_b, xb);
        let concat: Vec<f64> = fwd.ha.iter().chain(&fwd.hb).copied().collect();
        let mut w21 = Matrix::zeros(d.d_comb.len(), concat.len());
        w21.add_outer(1.0, &d.d_comb, &concat);
        Self {
            w1_a,
            w1_b,
            b1_a: d.d_subnet_a.clone(),
            b1_b: d.d_subnet_b.clone(),
            w21,
            b21: d.d_comb.clone(),
            w22: fwd.z.iter().map(|z| d.d_out * z).collect(),
            b22: d.d_out,
        }
    }

    /// `½ (δW1a + δW1b)`.
    pub fn shared_w1_update(&self) -> Matrix {
        let data = self
            .w1_a
            .as_slice()
            .iter()
            .zip(self.w1_b.as_slice())
            .map(|(a, b)| 0.5 * (a + b))
            .collect();
        Matrix::from_vec(self.w1_a.rows(), self.w1_a.cols(), data)
    }

    pub fn shared_b1_update(&self) -> Vec<f64> {
        self.b1_a.iter().zip(&self.b1_b).map(|(a, b)| 0.5 * (a + b)).collect()
    }

    /// Total derivative of the loss with respect to the tied W1.
    pub fn w1_total(&self) -> Matrix {
        let data = self
            .w1_a
            .as_slice()
            .iter()
            .zip(self.w1_b.as_slice())
            .map(|(a, b)| a + b)
            .collect();
        Matrix::from_vec(self.w1_a.rows(), self.w1_a.cols(), data)
    }
}

/// Mean of `(score - target)²`.
pub fn mse_loss(scores: &[f64], targets: &[f64]) -> Result<f64> {
    if scores.len() != targets.len() {
        return Err(Error::Dimension {
            expected: scores.len(),
            got: targets.len(),
        });
    }
    if scores.is_empty() {
        return Err(Error::InvalidArgument("mse_loss of an empty list".into()));
    }
    let sum: f64 = scores.iter().zip(targets).map(|(s, t)| (s - t).powi(2)).sum();
    Ok(sum / scores.len() as f64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(d: usize, h: usize, c: usize, seed: u64) -> SiameseParams {
        let config = TrainConfig {
            seed,
            init_range: 0.5,
            ..TrainConfig::default()
        };
        SiameseParams::init(d, h, c, &config).unwrap()
    }

    #[test]
    fn lrelu_values() {
        assert_eq!(lrelu(-1.0, 0.1), -0.1);
        assert_eq!(lrelu(2.0, 0.1), 2.0);
        assert_eq!(lrelu(0.0, 0.1), 0.0);
        assert_eq!(lrelu_grad(0.0, 0.1), 0.1);
    }

    #[test]
    fn lrate_values() {
        let c = TrainConfig::default();
        assert_eq!(lrate(0, &c), 0.0005);
        assert_eq!(lrate(100, &c), 0.00025);
        assert_eq!(lrate(300, &c), 0.000125);
    }

    #[test]
    fn init_is_bounded_deterministic_with_zero_biases() {
        let c = TrainConfig { seed: 11, ..TrainConfig::default() };
        let p = SiameseParams::init(7, 5, 3, &c).unwrap();
        for w in p.w1.as_slice().iter().chain(p.w21.as_slice()).chain(&p.w22) {
            assert!((-0.01..=0.01).contains(w));
        }
        assert!(p.b1.iter().chain(&p.b21).all(|&b| b == 0.0));
        assert_eq!(p.b22, 0.0);
        assert_eq!(p, SiameseParams::init(7, 5, 3, &c).unwrap());
        assert!(SiameseParams::init(0, 5, 3, &c).is_err());
    }

    #[test]
    fn zero_network() {
        let c = TrainConfig { init_range: 0.0, ..TrainConfig::default() };
        let p = SiameseParams::init(4, 3, 2, &c).unwrap();
        let x = [1.0, -2.0, 0.5, 3.0];
        assert_eq!(p.subnet_forward(&x, None).unwrap(), vec![0.0; 3]);
        assert_eq!(p.score(&x, &x).unwrap(), 0.0);
        let g = p.backward(&x, &x, 0.0, None).unwrap();
        assert!(g.w1_a.as_slice().iter().chain(g.w21.as_slice()).chain(&g.w22).all(|&v| v == 0.0));
        assert_eq!(g.b22, 0.0);
    }

    #[test]
    fn inverted_dropout_scales_by_two() {
        let p = params(4, 6, 3, 2);
        let x = [0.3, -0.2, 0.9, 0.1];
        let plain = p.subnet_forward(&x, None).unwrap();
        let mask = DropoutMask::all_kept(6, 0.5);
        let dropped = p.subnet_forward(&x, Some(&mask)).unwrap();
        for (a, b) in plain.iter().zip(&dropped) {
            assert_eq!(2.0 * a, *b);
        }
        assert_eq!(plain, p.subnet_forward(&x, None).unwrap());
    }

    #[test]
    fn dimension_mismatch_is_an_error() {
        let p = params(4, 3, 2, 0);
        assert!(p.subnet_forward(&[1.0; 3], None).is_err());
        assert!(p.forward(&[1.0; 4], &[1.0; 5], None).is_err());
    }

    #[test]
    fn concatenation_order_matters() {
        let p = params(4, 3, 2, 5);
        let xa = [1.0, 0.0, 0.5, -1.0];
        let xb = [0.0, 2.0, -0.5, 0.3];
        let ab = p.score(&xa, &xb).unwrap();
        let ba = p.score(&xb, &xa).unwrap();
        assert!(ab.abs() < 1.0 && ba.abs() < 1.0);
        assert_ne!(ab, ba);
    }

    #[test]
    fn branches_read_the_shared_layer() {
        let p = params(5, 4, 3, 8);
        let xa = [0.2, -0.1, 0.4, 0.0, 1.0];
        let xb = [-0.3, 0.5, 0.1, 0.9, -0.2];
        let f = p.forward(&xa, &xb, None).unwrap();
        assert_eq!(f.ha, p.subnet_forward(&xa, None).unwrap());
        assert_eq!(f.hb, p.subnet_forward(&xb, None).unwrap());
    }

    #[test]
    fn mse_examples() {
        assert_eq!(mse_loss(&[1.0, 0.0], &[1.0, 0.0]).unwrap(), 0.0);
        assert_eq!(mse_loss(&[0.0, 0.0], &[1.0, 1.0]).unwrap(), 1.0);
        assert_eq!(mse_loss(&[0.5], &[0.0]).unwrap(), 0.25);
        assert!(mse_loss(&[0.5], &[0.0, 1.0]).is_err());
    }

    #[test]
    fn zero_second_input_halves_branch_gradient() {
        let p = SiameseParams {
            b1: vec![0.0; 3],
            ..params(4, 3, 2, 21)
        };
        let xa = [0.7, -0.4, 1.2, 0.3];
        let xb = [0.0; 4];
        let g = p.backward(&xa, &xb, 1.0, None).unwrap();
        assert!(g.w1_b.as_slice().iter().all(|&v| v == 0.0));
        let upd = g.shared_w1_update();
        for (u, a) in upd.as_slice().iter().zip(g.w1_a.as_slice()) {
            assert_eq!(*u, a / 2.0);
        }
    }

    #[test]
    fn fused_step_matches_materialised_gradients() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let p = params(6, 5, 4, 13);
        let xa: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let xb: Vec<f64> = (0..6).map(|_| rng.random_range(-1.0..1.0)).collect();
        let masks = BranchMasks {
            a: DropoutMask::sample(5, 0.5, &mut rng),
            b: DropoutMask::sample(5, 0.5, &mut rng),
        };
        let g = p.backward(&xa, &xb, 1.0, Some(&masks)).unwrap();
        let mut fused = p.clone();
        fused.sgd_step(&xa, &xb, 1.0, Some(&masks), 0.1, true);
        let mut reference = p.clone();
        reference.apply_gradients(&g, 0.1, true);
        for (a, b) in fused.w1.as_slice().iter().zip(reference.w1.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
        for (a, b) in fused.w21.as_slice().iter().zip(reference.w21.as_slice()) {
            assert!((a - b).abs() < 1e-15);
        }
        assert!((fused.b22 - reference.b22).abs() < 1e-15);
    }
}
