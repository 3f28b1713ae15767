use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{argmax, Classifier, LabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::dot;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct SvmParams {
    pub epochs: usize,
    /// L2 regularisation strength λ.
    pub reg: f64,
    /// Initial step; the step at update t is `eta0 / (1 + eta0·λ·t)`.
    pub eta0: f64,
    pub fit_bias: bool,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        Self {
            epochs: 20,
            reg: 1e-4,
            eta0: 0.1,
            fit_bias: true,
            seed: 0,
        }
    }
}

/// One-vs-rest linear soft-margin classifier trained by hinge-loss SGD.
#[derive(Debug, Clone)]
pub struct LinearSvm {
    classes: Vec<String>,
    weights: Vec<Vec<f64>>,
    biases: Vec<f64>,
}

impl LinearSvm {
    pub fn fit(train: &LabeledDataset, params: SvmParams) -> Result<Self> {
        let n_classes = train.classes().len();
        if n_classes < 2 {
            return Err(Error::InvalidArgument("SVM needs at least two classes".into()));
        }
        if !(params.reg > 0.0 && params.eta0 > 0.0) {
            return Err(Error::InvalidArgument("SVM reg and eta0 must be positive".into()));
        }
        let dim = train.dim();
        let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
        let mut order: Vec<usize> = (0..train.len()).collect();
        let mut weights = vec![vec![0.0; dim]; n_classes];
        let mut biases = vec![0.0; n_classes];
        let mut t = 0usize;
        for _ in 0..params.epochs {
            order.shuffle(&mut rng);
            for &i in &order {
                t += 1;
                let eta = params.eta0 / (1.0 + params.eta0 * params.reg * t as f64);
                let shrink = 1.0 - eta * params.reg;
                let x = train.row(i);
                let yi = train.class_indices()[i];
                for (c, (w, b)) in weights.iter_mut().zip(biases.iter_mut()).enumerate() {
                    let y = if c == yi { 1.0 } else { -1.0 };
                    let margin = y * (dot(w, x) + *b);
                    w.iter_mut().for_each(|wj| *wj *= shrink);
                    if margin < 1.0 {
                        for (wj, &xj) in w.iter_mut().zip(x) {
                            *wj += eta * y * xj;
                        }
                        if params.fit_bias {
                            *b += eta * y;
                        }
                    }
                }
            }
        }
        Ok(Self {
            classes: train.classes().to_vec(),
            weights,
            biases,
        })
    }

    pub fn decision_values(&self, x: &[f64]) -> Vec<f64> {
        self.weights
            .iter()
            .zip(&self.biases)
            .map(|(w, b)| dot(w, x) + b)
            .collect()
    }
}

impl Classifier for LinearSvm {
    fn predict(&self, x: &[f64]) -> &str {
        &self.classes[argmax(&self.decision_values(x))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureKind, FeatureMatrix};

    fn data(rows: Vec<Vec<f64>>, labels: &[&str]) -> LabeledDataset {
        let dim = rows[0].len();
        let x = FeatureMatrix::from_rows(FeatureKind::Avg, (0..rows.len()).collect(), rows, dim).unwrap();
        let labels: Vec<String> = labels.iter().map(|s| s.to_string()).collect();
        LabeledDataset::new(x, &labels).unwrap()
    }

    /// Ten points split by x + y = 0 with distance ≥ 0.5 to the line.
    fn separable() -> (Vec<Vec<f64>>, Vec<&'static str>) {
        let pos = [[1.0, 0.5], [2.0, 1.0], [0.5, 1.5], [1.5, -0.2], [0.2, 1.0]];
        let neg = [[-1.0, -0.5], [-2.0, 0.3], [-0.5, -1.5], [0.1, -1.2], [-1.3, -0.4]];
        let mut rows = Vec::new();
        let mut labels = Vec::new();
        for p in pos {
            assert!((p[0] + p[1]) / 2f64.sqrt() >= 0.5);
            rows.push(p.to_vec());
            labels.push("pos");
        }
        for p in neg {
            assert!(-(p[0] + p[1]) / 2f64.sqrt() >= 0.5);
            rows.push(p.to_vec());
            labels.push("neg");
        }
        (rows, labels)
    }

    #[test]
    fn separable_training_accuracy_is_one() {
        let (rows, labels) = separable();
        let d = data(rows.clone(), &labels);
        let svm = LinearSvm::fit(&d, SvmParams { epochs: 200, eta0: 0.5, reg: 1e-3, ..SvmParams::default() }).unwrap();
        for (r, l) in rows.iter().zip(&labels) {
            assert_eq!(svm.predict(r), *l);
        }
    }

    #[test]
    fn negated_data_gives_negated_model() {
        let (rows, labels) = separable();
        let params = SvmParams { epochs: 30, seed: 3, ..SvmParams::default() };
        let svm = LinearSvm::fit(&data(rows.clone(), &labels), params).unwrap();
        let neg_rows: Vec<Vec<f64>> = rows.iter().map(|r| r.iter().map(|v| -v).collect()).collect();
        let neg_svm = LinearSvm::fit(&data(neg_rows, &labels), params).unwrap();
        for q in [[0.3, 0.9], [-2.0, 0.1], [0.0, -0.7]] {
            let nq = [-q[0], -q[1]];
            assert_eq!(svm.predict(&q), neg_svm.predict(&nq));
        }
    }

    #[test]
    fn bias_free_argmax_is_scale_invariant() {
        let (rows, labels) = separable();
        let params = SvmParams { fit_bias: false, ..SvmParams::default() };
        let svm = LinearSvm::fit(&data(rows, &labels), params).unwrap();
        let q = [0.4, -0.1];
        let dv = svm.decision_values(&q);
        let dv3 = svm.decision_values(&[1.2, -0.3]);
        for (a, b) in dv.iter().zip(&dv3) {
            assert!((3.0 * a - b).abs() < 1e-12);
        }
        assert_eq!(svm.predict(&q), svm.predict(&[1.2, -0.3]));
    }

    #[test]
    fn single_class_is_an_error() {
        let d = data(vec![vec![1.0], vec![2.0]], &["a", "a"]);
        assert!(LinearSvm::fit(&d, SvmParams::default()).is_err());
    }
}
