use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::{majority, Classifier, LabeledDataset};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TreeParams {
    /// `None` grows until leaves are pure or unsplittable.
    pub max_depth: Option<usize>,
    pub min_leaf: usize,
    pub seed: u64,
}

impl Default for TreeParams {
    fn default() -> Self {
        Self {
            max_depth: None,
            min_leaf: 1,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
enum Node {
    Leaf(usize),
    Split {
        feature: usize,
        threshold: f64,
        left: Box<Node>,
        right: Box<Node>,
    },
}

/// CART classification tree with Gini impurity and midpoint thresholds.
#[derive(Debug, Clone, PartialEq)]
pub struct DecisionTree {
    classes: Vec<String>,
    root: Node,
}

pub(crate) fn gini(counts: &[usize], total: usize) -> f64 {
    if total == 0 {
        return 0.0;
    }
    let t = total as f64;
    1.0 - counts.iter().map(|&c| (c as f64 / t).powi(2)).sum::<f64>()
}

/// Shared tree grower; `features_per_split == dim` reproduces a plain tree.
pub(crate) struct Grower<'a> {
    pub data: &'a LabeledDataset,
    pub params: TreeParams,
    pub features_per_split: usize,
    pub rng: ChaCha8Rng,
}

struct BestSplit {
    feature: usize,
    threshold: f64,
    impurity: f64,
}

impl Grower<'_> {
    fn counts(&self, idx: &[usize]) -> Vec<usize> {
        let mut c = vec![0; self.data.classes().len()];
        for &i in idx {
            c[self.data.class_indices()[i]] += 1;
        }
        c
    }

    fn grow_node(&mut self, idx: &mut [usize], depth: usize) -> Node {
        let counts = self.counts(idx);
        let label = majority(&counts);
        let pure = counts.iter().filter(|&&c| c > 0).count() <= 1;
        let depth_done = self.params.max_depth.is_some_and(|m| depth >= m);
        let min_leaf = self.params.min_leaf.max(1);
        if pure || depth_done || idx.len() < 2 * min_leaf {
            return Node::Leaf(label);
        }
        let Some(best) = self.best_split(idx, &counts) else {
            return Node::Leaf(label);
        };
        let parent = gini(&counts, idx.len());
        debug_assert!(best.impurity <= parent + 1e-12);

        let x = &self.data.x;
        let mut left: Vec<usize> = Vec::new();
        let mut right: Vec<usize> = Vec::new();
        for &i in idx.iter() {
            if x.row(i)[best.feature] <= best.threshold {
                left.push(i);
            } else {
                right.push(i);
            }
        }
        Node::Split {
            feature: best.feature,
            threshold: best.threshold,
            left: Box::new(self.grow_node(&mut left, depth + 1)),
            right: Box::new(self.grow_node(&mut right, depth + 1)),
        }
    }

    fn candidate_features(&mut self) -> Vec<usize> {
        let dim = self.data.dim();
        if self.features_per_split >= dim {
            (0..dim).collect()
        } else {
            let mut f = sample(&mut self.rng, dim, self.features_per_split).into_vec();
            f.sort_unstable();
            f
        }
    }

    fn best_split(&mut self, idx: &mut [usize], counts: &[usize]) -> Option<BestSplit> {
        let n = idx.len();
        let n_classes = counts.len();
        let min_leaf = self.params.min_leaf.max(1);
        let features = self.candidate_features();
        let x = &self.data.x;
        let y = self.data.class_indices();
        let mut best: Option<BestSplit> = None;
        let mut left = vec![0usize; n_classes];
        for f in features {
            idx.sort_by(|&a, &b| x.row(a)[f].total_cmp(&x.row(b)[f]).then(a.cmp(&b)));
            left.iter_mut().for_each(|c| *c = 0);
            for pos in 0..n - 1 {
                left[y[idx[pos]]] += 1;
                let n_left = pos + 1;
                let lo = x.row(idx[pos])[f];
                let hi = x.row(idx[pos + 1])[f];
                if lo == hi || n_left < min_leaf || n - n_left < min_leaf {
                    continue;
                }
                let n_right = n - n_left;
                let (mut sq_left, mut sq_right) = (0.0, 0.0);
                for (&c, &l) in counts.iter().zip(&left) {
                    sq_left += (l as f64).powi(2);
                    sq_right += ((c - l) as f64).powi(2);
                }
                // n · weighted Gini = n_l (1 - Σ(l/n_l)²) + n_r (1 - Σ(r/n_r)²)
                let impurity = (n as f64 - sq_left / n_left as f64 - sq_right / n_right as f64) / n as f64;
                if best.as_ref().is_none_or(|b| impurity < b.impurity) {
                    let mut threshold = 0.5 * (lo + hi);
                    if threshold >= hi {
                        threshold = lo;
                    }
                    best = Some(BestSplit {
                        feature: f,
                        threshold,
                        impurity,
                    });
                }
            }
        }
        best
    }
}

impl DecisionTree {
    pub fn fit(train: &LabeledDataset, params: TreeParams) -> Result<Self> {
        if train.is_empty() {
            return Err(Error::InvalidArgument("decision tree needs training rows".into()));
        }
        let mut idx: Vec<usize> = (0..train.len()).collect();
        Ok(Self::grow_on(train, params, train.dim(), &mut idx))
    }

    pub(crate) fn grow_on(train: &LabeledDataset, params: TreeParams, features_per_split: usize, idx: &mut [usize]) -> Self {
        let mut grower = Grower {
            data: train,
            params,
            features_per_split,
            rng: ChaCha8Rng::seed_from_u64(params.seed),
        };
        let root = grower.grow_node(idx, 0);
        Self {
            classes: train.classes().to_vec(),
            root,
        }
    }

    pub(crate) fn predict_index(&self, x: &[f64]) -> usize {
        let mut node = &self.root;
        loop {
            match node {
                Node::Leaf(c) => return *c,
                Node::Split {
                    feature,
                    threshold,
                    left,
                    right,
                } => {
                    node = if x[*feature] <= *threshold { left } else { right };
                }
            }
        }
    }

    pub fn depth(&self) -> usize {
        fn depth(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 0,
                Node::Split { left, right, .. } => 1 + depth(left).max(depth(right)),
            }
        }
        depth(&self.root)
    }

    pub fn n_leaves(&self) -> usize {
        fn leaves(n: &Node) -> usize {
            match n {
                Node::Leaf(_) => 1,
                Node::Split { left, right, .. } => leaves(left) + leaves(right),
            }
        }
        leaves(&self.root)
    }
}

impl Classifier for DecisionTree {
    fn predict(&self, x: &[f64]) -> &str {
        &self.classes[self.predict_index(x)]
    }
}
