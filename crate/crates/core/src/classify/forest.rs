use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::tree::{DecisionTree, TreeParams};
use super::{majority, Classifier, LabeledDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ForestParams {
    pub n_trees: usize,
    /// Fraction of features examined per split; `None` means √D.
    pub feature_frac: Option<f64>,
    pub bootstrap: bool,
    pub tree: TreeParams,
    pub seed: u64,
}

impl Default for ForestParams {
    fn default() -> Self {
        Self {
            n_trees: 100,
            feature_frac: None,
            bootstrap: true,
            tree: TreeParams::default(),
            seed: 0,
        }
    }
}

/// Bagged CART trees with per-split feature subsampling and a majority vote.
#[derive(Debug, Clone)]
pub struct RandomForest {
    classes: Vec<String>,
    trees: Vec<DecisionTree>,
}

impl RandomForest {
    pub fn fit(train: &LabeledDataset, params: ForestParams) -> Result<Self> {
        if params.n_trees == 0 {
            return Err(Error::InvalidArgument("a forest needs at least one tree".into()));
        }
        if train.is_empty() {
            return Err(Error::InvalidArgument("random forest needs training rows".into()));
        }
        let dim = train.dim();
        let per_split = match params.feature_frac {
            Some(f) if f > 0.0 && f <= 1.0 => ((f * dim as f64).round() as usize).clamp(1, dim),
            Some(f) => return Err(Error::InvalidArgument(format!("feature_frac must lie in (0, 1], got {f}"))),
            None => ((dim as f64).sqrt().floor() as usize).clamp(1, dim),
        };
        let n = train.len();
        let trees = (0..params.n_trees)
            .into_par_iter()
            .map(|t| {
                let tree_seed = params.seed.wrapping_add(t as u64);
                let mut idx: Vec<usize> = if params.bootstrap {
                    let mut rng = ChaCha8Rng::seed_from_u64(tree_seed ^ 0xB007_57A9);
                    (0..n).map(|_| rng.random_range(0..n)).collect()
                } else {
                    (0..n).collect()
                };
                let tree_params = TreeParams {
                    seed: tree_seed,
                    ..params.tree
                };
                DecisionTree::grow_on(train, tree_params, per_split, &mut idx)
            })
            .collect();
        Ok(Self {
            classes: train.classes().to_vec(),
            trees,
        })
    }

    pub fn n_trees(&self) -> usize {
        self.trees.len()
    }

    pub fn votes(&self, x: &[f64]) -> Vec<usize> {
        let mut votes = vec![0; self.classes.len()];
        for t in &self.trees {
            votes[t.predict_index(x)] += 1;
        }
        votes
    }
}

impl Classifier for RandomForest {
    fn predict(&self, x: &[f64]) -> &str {
        &self.classes[majority(&self.votes(x))]
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::{FeatureKind, FeatureMatrix};

    fn data() -> LabeledDataset {
        let rows: Vec<Vec<f64>> = (0..30)
            .map(|i| {
                let f = i as f64;
                vec![(f * 0.37).sin(), (f * 0.11).cos(), f % 7.0, (f * 1.3).sin() * 2.0]
            })
            .collect();
        let labels: Vec<String> = (0..30).map(|i| ["a", "b", "c"][(i * 7 % 11) % 3].to_string()).collect();
        let x = FeatureMatrix::from_rows(FeatureKind::Avg, (0..30).collect(), rows, 4).unwrap();
        LabeledDataset::new(x, &labels).unwrap()
    }

    #[test]
    fn single_full_tree_reduces_to_dtree() {
        let d = data();
        let tp = TreeParams { max_depth: Some(4), min_leaf: 1, seed: 9 };
        let rf = RandomForest::fit(
            &d,
            ForestParams { n_trees: 1, feature_frac: Some(1.0), bootstrap: false, tree: tp, seed: 9 },
        )
        .unwrap();
        let dt = DecisionTree::fit(&d, tp).unwrap();
        assert_eq!(rf.trees[0], dt);
        for i in 0..d.len() {
            assert_eq!(rf.predict(d.row(i)), dt.predict(d.row(i)));
        }
    }

    #[test]
    fn majority_vote_and_determinism() {
        assert_eq!(majority(&[2, 1]), 0);
        let d = data();
        let p = ForestParams { n_trees: 15, seed: 4, ..ForestParams::default() };
        let a = RandomForest::fit(&d, p).unwrap();
        let b = RandomForest::fit(&d, p).unwrap();
        assert_eq!(a.trees, b.trees);
        assert!(RandomForest::fit(&d, ForestParams { n_trees: 0, ..p }).is_err());
        assert!(RandomForest::fit(&d, ForestParams { feature_frac: Some(1.5), ..p }).is_err());
    }
}
