use serde::{Deserialize, Serialize};

use super::DocVector;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};

/// Sparse vector with strictly increasing column indices.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct SparseRow {
    pub indices: Vec<usize>,
    pub values: Vec<f64>,
}

impl SparseRow {
    pub fn from_dense(row: &[f64]) -> Self {
        let mut out = SparseRow::default();
        for (i, &v) in row.iter().enumerate() {
            if v != 0.0 {
                out.indices.push(i);
                out.values.push(v);
            }
        }
        out
    }

    pub fn to_dense(&self, dim: usize) -> Vec<f64> {
        let mut out = vec![0.0; dim];
        for (&i, &v) in self.indices.iter().zip(&self.values) {
            out[i] = v;
        }
        out
    }

    pub fn nnz(&self) -> usize {
        self.indices.len()
    }
}

/// Raw term count times `ln(N / df)`, rows L2-normalised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TfidfModel {
    pub vocabulary: Vocabulary,
    pub idf: Vec<f64>,
    pub n_train_docs: usize,
}

impl TfidfModel {
    pub fn fit(train_docs: &[&[String]], vocabulary: Vocabulary) -> Result<Self> {
        if train_docs.is_empty() {
            return Err(Error::InvalidArgument("TFIDF needs at least one training document".into()));
        }
        let mut df = vec![0usize; vocabulary.len()];
        let mut seen = vec![usize::MAX; vocabulary.len()];
        for (d, doc) in train_docs.iter().enumerate() {
            for t in doc.iter() {
                if let Some(i) = vocabulary.index_of(t) {
                    if seen[i] != d {
                        seen[i] = d;
                        df[i] += 1;
                    }
                }
            }
        }
        if let Some(i) = df.iter().position(|&c| c == 0) {
            return Err(Error::InvalidArgument(format!(
                "vocabulary term '{}' never occurs in the training documents",
                vocabulary.term(i)
            )));
        }
        let n = train_docs.len() as f64;
        let idf = df.iter().map(|&c| (n / c as f64).ln()).collect();
        Ok(Self {
            vocabulary,
            idf,
            n_train_docs: train_docs.len(),
        })
    }

    pub fn dim(&self) -> usize {
        self.idf.len()
    }

    pub fn transform_sparse(&self, doc: &[String]) -> SparseRow {
        let mut counts: Vec<(usize, f64)> = Vec::new();
        {
            let mut map = std::collections::HashMap::new();
            for t in doc {
                if let Some(i) = self.vocabulary.index_of(t) {
                    *map.entry(i).or_insert(0.0) += 1.0;
                }
            }
            counts.extend(map);
        }
        counts.sort_unstable_by_key(|&(i, _)| i);
        let mut row = SparseRow::default();
        for (i, c) in counts {
            let w = c * self.idf[i];
            if w != 0.0 {
                row.indices.push(i);
                row.values.push(w);
            }
        }
        let norm = row.values.iter().map(|v| v * v).sum::<f64>().sqrt();
        if norm > 0.0 {
            for v in &mut row.values {
                *v /= norm;
            }
        }
        row
    }

    pub fn transform(&self, doc: &[String]) -> DocVector {
        self.transform_sparse(doc).to_dense(self.dim())
    }
}
