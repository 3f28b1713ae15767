use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{DocVector, FeatureMatrix, SparseRow, TfidfModel};
use crate::error::{Error, Result};
use crate::linalg::{symmetric_eigen, Matrix};

/// Eigenvalues below this fraction of the largest are treated as zero rank.
const RANK_TOLERANCE: f64 = 1e-12;

/// Truncated SVD of the document-term TFIDF matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LsaModel {
    pub tfidf: Option<TfidfModel>,
    /// `V × D`; column k is the k-th right singular vector.
    pub projection: Matrix,
    pub singular_values: Vec<f64>,
}

/// Fit on a dense TFIDF matrix (one row per training document).
pub fn lsa_fit(train_tfidf: &FeatureMatrix, dim: usize) -> Result<LsaModel> {
    let rows: Vec<SparseRow> = (0..train_tfidf.len())
        .map(|r| SparseRow::from_dense(train_tfidf.row(r)))
        .collect();
    let (singular_values, projection) = truncated_svd(&rows, train_tfidf.dim(), dim)?;
    Ok(LsaModel {
        tfidf: None,
        projection,
        singular_values,
    })
}

impl LsaModel {
    /// Fit from token lists through `tfidf`; the model then transforms raw documents.
    pub fn fit(tfidf: TfidfModel, train_docs: &[&[String]], dim: usize) -> Result<Self> {
        let rows: Vec<SparseRow> = train_docs.iter().map(|d| tfidf.transform_sparse(d)).collect();
        let (singular_values, projection) = truncated_svd(&rows, tfidf.dim(), dim)?;
        Ok(Self {
            tfidf: Some(tfidf),
            projection,
            singular_values,
        })
    }

    pub fn dim(&self) -> usize {
        self.projection.cols()
    }

    pub fn input_dim(&self) -> usize {
        self.projection.rows()
    }

    pub fn transform(&self, tfidf_row: &[f64]) -> Result<DocVector> {
        if tfidf_row.len() != self.input_dim() {
            return Err(Error::Dimension {
                expected: self.input_dim(),
                got: tfidf_row.len(),
            });
        }
        Ok(self.projection.matvec_t(tfidf_row))
    }

    pub fn transform_sparse(&self, row: &SparseRow) -> DocVector {
        let mut out = vec![0.0; self.dim()];
        for (&i, &v) in row.indices.iter().zip(&row.values) {
            for (o, &p) in out.iter_mut().zip(self.projection.row(i)) {
                *o += v * p;
            }
        }
        out
    }

    /// Project a raw token list; requires a model built with [`LsaModel::fit`].
    pub fn transform_tokens(&self, doc: &[String]) -> Result<DocVector> {
        let tfidf = self
            .tfidf
            .as_ref()
            .ok_or_else(|| Error::InvalidArgument("LSA model has no attached TFIDF model".into()))?;
        Ok(self.transform_sparse(&tfidf.transform_sparse(doc)))
    }
}

/// Top-`dim` singular values and right singular vectors (as a `n_cols × dim`
/// matrix) of the sparse matrix whose rows are `rows`.
///
/// The eigen-decomposition runs on whichever Gram matrix is smaller. Each
/// component's sign is fixed so its largest-magnitude loading is positive.
fn truncated_svd(rows: &[SparseRow], n_cols: usize, dim: usize) -> Result<(Vec<f64>, Matrix)> {
    if dim == 0 {
        return Err(Error::InvalidArgument("LSA dimension must be at least 1".into()));
    }
    let n = rows.len();
    if n == 0 || n_cols == 0 {
        return Err(Error::InvalidArgument("LSA needs a non-empty TFIDF matrix".into()));
    }

    let (eigenvalues, mut right) = if n <= n_cols {
        let gram = row_gram(rows);
        let (vals, u) = symmetric_eigen(&gram);
        let rank = numeric_rank(&vals);
        let k = dim.min(rank);
        // v_k = Aᵀ u_k / σ_k
        let mut v = Matrix::zeros(n_cols, k);
        for (d, row) in rows.iter().enumerate() {
            for (&c, &a) in row.indices.iter().zip(&row.values) {
                let vr = v.row_mut(c);
                for (j, vj) in vr.iter_mut().enumerate() {
                    *vj += a * u.get(j, d);
                }
            }
        }
        for j in 0..k {
            let sigma = vals[j].sqrt();
            for c in 0..n_cols {
                let x = v.get(c, j) / sigma;
                v.set(c, j, x);
            }
        }
        (vals, v)
    } else {
        let gram = column_gram(rows, n_cols);
        let (vals, vt) = symmetric_eigen(&gram);
        let rank = numeric_rank(&vals);
        let k = dim.min(rank);
        let v = Matrix::from_fn(n_cols, k, |c, j| vt.get(j, c));
        (vals, v)
    };

    let k = right.cols();
    if k == 0 {
        return Err(Error::Numeric("TFIDF matrix is identically zero; LSA undefined".into()));
    }
    if k < dim {
        log::warn!("requested {dim} LSA components but the TFIDF matrix has rank {k}; using {k}");
    }

    for j in 0..k {
        let mut best = 0;
        for c in 1..n_cols {
            if right.get(c, j).abs() > right.get(best, j).abs() {
                best = c;
            }
        }
        if right.get(best, j) < 0.0 {
            for c in 0..n_cols {
                let x = -right.get(c, j);
                right.set(c, j, x);
            }
        }
    }
    let singular_values = eigenvalues[..k].iter().map(|&l| l.max(0.0).sqrt()).collect();
    Ok((singular_values, right))
}

fn numeric_rank(eigenvalues: &[f64]) -> usize {
    let top = eigenvalues.first().copied().unwrap_or(0.0);
    if top <= 0.0 {
        return 0;
    }
    eigenvalues.iter().take_while(|&&l| l > top * RANK_TOLERANCE).count()
}

/// `A Aᵀ` for sparse rows.
fn row_gram(rows: &[SparseRow]) -> Matrix {
    let n = rows.len();
    let width = rows
        .iter()
        .flat_map(|r| r.indices.last().copied())
        .max()
        .map_or(0, |m| m + 1);
    let upper: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            let dense = rows[i].to_dense(width);
            (i..n)
                .map(|j| {
                    rows[j]
                        .indices
                        .iter()
                        .zip(&rows[j].values)
                        .map(|(&c, &v)| dense[c] * v)
                        .sum()
                })
                .collect()
        })
        .collect();
    let mut g = Matrix::zeros(n, n);
    for (i, vals) in upper.into_iter().enumerate() {
        for (off, v) in vals.into_iter().enumerate() {
            g.set(i, i + off, v);
            g.set(i + off, i, v);
        }
    }
    g
}

/// `Aᵀ A` for sparse rows.
fn column_gram(rows: &[SparseRow], n_cols: usize) -> Matrix {
    let mut g = Matrix::zeros(n_cols, n_cols);
    for row in rows {
        for (&a, &va) in row.indices.iter().zip(&row.values) {
            for (&b, &vb) in row.indices.iter().zip(&row.values) {
                let x = g.get(a, b) + va * vb;
                g.set(a, b, x);
            }
        }
    }
    g
}
