use super::{Classifier, LabeledDataset};
use crate::error::{Error, Result};
use crate::linalg::{dot, norm};

/// Cosine-similarity k-nearest-neighbour vote.
///
/// Ties in vote count are broken by the summed similarity of the voters,
/// then by label order.
#[derive(Debug, Clone)]
pub struct Knn {
    train: LabeledDataset,
    norms: Vec<f64>,
    k: usize,
}

impl Knn {
    pub fn fit(train: LabeledDataset, k: usize) -> Result<Self> {
        if k == 0 {
            return Err(Error::InvalidArgument("k must be at least 1".into()));
        }
        if train.is_empty() {
            return Err(Error::InvalidArgument("KNN needs a non-empty training set".into()));
        }
        let k = if k > train.len() {
            log::warn!("k = {k} exceeds the {} training rows; clamping", train.len());
            train.len()
        } else {
            k
        };
        let norms = (0..train.len()).map(|i| norm(train.row(i))).collect();
        Ok(Self { train, norms, k })
    }

    pub fn k(&self) -> usize {
        self.k
    }

    fn predict_index(&self, query: &[f64]) -> usize {
        let qn = norm(query);
        let mut sims: Vec<(f64, usize)> = (0..self.train.len())
            .map(|i| {
                let denom = qn * self.norms[i];
                let s = if denom == 0.0 { 0.0 } else { dot(query, self.train.row(i)) / denom };
                (s, i)
            })
            .collect();
        let by_similarity = |a: &(f64, usize), b: &(f64, usize)| b.0.total_cmp(&a.0).then(a.1.cmp(&b.1));
        if self.k < sims.len() {
            sims.select_nth_unstable_by(self.k - 1, by_similarity);
            sims.truncate(self.k);
        }
        let n_classes = self.train.classes().len();
        let mut votes = vec![0usize; n_classes];
        let mut mass = vec![0.0; n_classes];
        sims.sort_by(by_similarity);
        for &(s, i) in &sims {
            let c = self.train.class_indices()[i];
            votes[c] += 1;
            mass[c] += s;
        }
        let mut best = 0;
        for c in 1..n_classes {
            if votes[c] > votes[best] || (votes[c] == votes[best] && mass[c] > mass[best]) {
                best = c;
            }
        }
        best
    }
}

impl Classifier for Knn {
    fn predict(&self, x: &[f64]) -> &str {
        &self.train.classes()[self.predict_index(x)]
    }
}
