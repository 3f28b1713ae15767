use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClassScores {
    pub label: String,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
    pub support: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub labels: Vec<String>,
    pub per_class: Vec<ClassScores>,
    pub macro_f1: f64,
    /// Equal to accuracy for single-label predictions.
    pub micro_f1: f64,
    /// `confusion[gold][pred]`, indexed like `labels`.
    pub confusion: Vec<Vec<usize>>,
}

fn ratio(num: usize, den: usize) -> f64 {
    if den == 0 {
        0.0
    } else {
        num as f64 / den as f64
    }
}

/// Per-class precision/recall/F1 (0/0 taken as 0) and their unweighted mean.
pub fn f1_report<S: AsRef<str>, T: AsRef<str>>(pred: &[S], gold: &[T], label_set: &[String]) -> Result<EvalReport> {
    if pred.len() != gold.len() {
        return Err(Error::Dimension {
            expected: gold.len(),
            got: pred.len(),
        });
    }
    if label_set.is_empty() {
        return Err(Error::InvalidArgument("label set is empty".into()));
    }
    let index = |l: &str| {
        label_set
            .iter()
            .position(|x| x == l)
            .ok_or_else(|| Error::InvalidArgument(format!("label '{l}' not in the label set")))
    };
    let k = label_set.len();
    let mut confusion = vec![vec![0usize; k]; k];
    for (p, g) in pred.iter().zip(gold) {
        confusion[index(g.as_ref())?][index(p.as_ref())?] += 1;
    }
    let mut per_class = Vec::with_capacity(k);
    let mut correct = 0;
    for c in 0..k {
        let tp = confusion[c][c];
        correct += tp;
        let gold_c: usize = confusion[c].iter().sum();
        let pred_c: usize = confusion.iter().map(|row| row[c]).sum();
        let precision = ratio(tp, pred_c);
        let recall = ratio(tp, gold_c);
        let f1 = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        per_class.push(ClassScores {
            label: label_set[c].clone(),
            precision,
            recall,
            f1,
            support: gold_c,
        });
    }
    let macro_f1 = per_class.iter().map(|s| s.f1).sum::<f64>() / k as f64;
    Ok(EvalReport {
        labels: label_set.to_vec(),
        per_class,
        macro_f1,
        micro_f1: ratio(correct, pred.len()),
        confusion,
    })
}

/// One line of the sweep CSV `representation,dim,classifier,param,macro_f1`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub representation: String,
    pub dim: usize,
    pub classifier: String,
    pub param: String,
    pub macro_f1: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn labels(s: &[&str]) -> Vec<String> {
        s.iter().map(|x| x.to_string()).collect()
    }

    #[test]
    fn perfect_and_total_miss() {
        let set = labels(&["A", "B"]);
        let r = f1_report(&["A", "B", "B"], &["A", "B", "B"], &set).unwrap();
        assert_eq!(r.macro_f1, 1.0);
        let r = f1_report(&["B", "A"], &["A", "B"], &set).unwrap();
        assert_eq!(r.macro_f1, 0.0);
    }

    #[test]
    fn hand_computed_example() {
        let set = labels(&["A", "B"]);
        let r = f1_report(&["A", "B", "B", "B"], &["A", "A", "B", "B"], &set).unwrap();
        assert!((r.per_class[0].f1 - 2.0 / 3.0).abs() < 1e-12);
        assert!((r.per_class[1].f1 - 0.8).abs() < 1e-12);
        assert!((r.macro_f1 - 0.733_333_333_333_333_3).abs() < 1e-9);
        assert_eq!(r.confusion, vec![vec![1, 1], vec![0, 2]]);
        assert_eq!(r.micro_f1, 0.75);
    }

    #[test]
    fn errors_and_absent_classes() {
        let set = labels(&["A", "B", "C"]);
        assert!(f1_report(&["A"], &["A", "B"], &set).is_err());
        assert!(f1_report(&["Z"], &["A"], &set).is_err());
        let r = f1_report(&["A", "A"], &["A", "A"], &set).unwrap();
        assert!((r.macro_f1 - 1.0 / 3.0).abs() < 1e-12);
    }
}
