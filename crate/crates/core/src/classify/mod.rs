//! Classifiers used to score document representations, and macro-F1 reporting.
//!
//! Class labels are indexed in lexicographic order; every tie in every
//! classifier resolves to the smallest index, i.e. the lexicographically
//! first label.

mod forest;
mod knn;
mod mlp;
mod report;
mod svm;
mod tree;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::features::FeatureMatrix;

pub use forest::{ForestParams, RandomForest};
pub use knn::Knn;
pub use mlp::{Mlp, MlpParams};
pub use report::{f1_report, ClassScores, EvalReport, SweepRow};
pub use svm::{LinearSvm, SvmParams};
pub use tree::{DecisionTree, TreeParams};

/// Feature rows with one class label each.
#[derive(Debug, Clone)]
pub struct LabeledDataset {
    pub x: FeatureMatrix,
    classes: Vec<String>,
    y: Vec<usize>,
}

impl LabeledDataset {
    pub fn new(x: FeatureMatrix, labels: &[String]) -> Result<Self> {
        if labels.len() != x.len() {
            return Err(Error::Dimension {
                expected: x.len(),
                got: labels.len(),
            });
        }
        let mut classes: Vec<String> = labels.to_vec();
        classes.sort();
        classes.dedup();
        let y = labels
            .iter()
            .map(|l| classes.binary_search(l).expect("label present"))
            .collect();
        Ok(Self { x, classes, y })
    }

    pub fn len(&self) -> usize {
        self.y.len()
    }

    pub fn is_empty(&self) -> bool {
        self.y.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn classes(&self) -> &[String] {
        &self.classes
    }

    pub fn class_indices(&self) -> &[usize] {
        &self.y
    }

    pub fn label(&self, i: usize) -> &str {
        &self.classes[self.y[i]]
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.x.row(i)
    }
}

/// A trained model mapping a feature vector to a class label.
pub trait Classifier: Send + Sync {
    fn predict(&self, x: &[f64]) -> &str;

    fn predict_all(&self, x: &FeatureMatrix) -> Vec<String> {
        use rayon::prelude::*;
        (0..x.len())
            .into_par_iter()
            .map(|r| self.predict(x.row(r)).to_string())
            .collect()
    }
}

/// Index of the largest count; ties go to the smallest index.
pub(crate) fn majority(counts: &[usize]) -> usize {
    let mut best = 0;
    for (i, &c) in counts.iter().enumerate() {
        if c > counts[best] {
            best = i;
        }
    }
    best
}

/// Index of the largest value; ties go to the smallest index.
pub(crate) fn argmax(values: &[f64]) -> usize {
    let mut best = 0;
    for (i, &v) in values.iter().enumerate() {
        if v > values[best] {
            best = i;
        }
    }
    best
}

/// Classifier families evaluated in a sweep.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ClassifierKind {
    Knn,
    Svm,
    Dtree,
    Rforest,
    Mlp,
}

impl ClassifierKind {
    pub fn as_str(self) -> &'static str {
        match self {
            ClassifierKind::Knn => "knn",
            ClassifierKind::Svm => "svm",
            ClassifierKind::Dtree => "dtree",
            ClassifierKind::Rforest => "rforest",
            ClassifierKind::Mlp => "mlp",
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::FeatureKind;

    #[test]
    fn dataset_indexes_labels_lexicographically() {
        let x = FeatureMatrix::from_rows(FeatureKind::Avg, vec![0, 1, 2], vec![vec![0.0]; 3], 1).unwrap();
        let labels = ["tech".to_string(), "business".to_string(), "tech".to_string()];
        let d = LabeledDataset::new(x, &labels).unwrap();
        assert_eq!(d.classes(), &["business", "tech"]);
        assert_eq!(d.class_indices(), &[1, 0, 1]);
        assert_eq!(majority(&[2, 3, 3]), 1);
        assert_eq!(argmax(&[0.5, 0.5]), 0);
    }
}
