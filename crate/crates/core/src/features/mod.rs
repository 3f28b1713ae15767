//! Conventional document representations and their on-disk matrix format.

mod embedding;
mod lda;
mod lsa;
mod tfidf;

use std::collections::HashMap;
use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::corpus::DocId;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

pub use embedding::{average_embedding, load_word_vectors, EmbeddingTable};
pub use lda::{LdaConfig, LdaModel};
pub use lsa::{lsa_fit, LsaModel};
pub use tfidf::{SparseRow, TfidfModel};

pub type DocVector = Vec<f64>;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum FeatureKind {
    Tfidf,
    Lsa,
    Lda,
    Avg,
    Deep,
}

impl FeatureKind {
    pub fn as_str(self) -> &'static str {
        match self {
            FeatureKind::Tfidf => "tfidf",
            FeatureKind::Lsa => "lsa",
            FeatureKind::Lda => "lda",
            FeatureKind::Avg => "avg",
            FeatureKind::Deep => "deep",
        }
    }
}

impl fmt::Display for FeatureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for FeatureKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "tfidf" => Ok(FeatureKind::Tfidf),
            "lsa" => Ok(FeatureKind::Lsa),
            "lda" => Ok(FeatureKind::Lda),
            "avg" => Ok(FeatureKind::Avg),
            "deep" => Ok(FeatureKind::Deep),
            other => Err(Error::Config(format!("unknown representation kind '{other}'"))),
        }
    }
}

/// Dense row-per-document matrix keyed by document id.
#[derive(Debug, Clone, PartialEq)]
pub struct FeatureMatrix {
    pub kind: FeatureKind,
    doc_ids: Vec<DocId>,
    values: Matrix,
    index: HashMap<DocId, usize>,
}

impl FeatureMatrix {
    pub fn new(kind: FeatureKind, doc_ids: Vec<DocId>, values: Matrix) -> Result<Self> {
        if doc_ids.len() != values.rows() {
            return Err(Error::Dimension {
                expected: doc_ids.len(),
                got: values.rows(),
            });
        }
        if !values.is_finite() {
            return Err(Error::Numeric(format!("{kind} matrix contains non-finite entries")));
        }
        let mut index = HashMap::with_capacity(doc_ids.len());
        for (row, &id) in doc_ids.iter().enumerate() {
            if index.insert(id, row).is_some() {
                return Err(Error::InvalidArgument(format!("duplicate document id {id}")));
            }
        }
        Ok(Self {
            kind,
            doc_ids,
            values,
            index,
        })
    }

    pub fn from_rows(kind: FeatureKind, doc_ids: Vec<DocId>, rows: Vec<DocVector>, dim: usize) -> Result<Self> {
        let mut data = Vec::with_capacity(rows.len() * dim);
        for r in &rows {
            if r.len() != dim {
                return Err(Error::Dimension {
                    expected: dim,
                    got: r.len(),
                });
            }
            data.extend_from_slice(r);
        }
        Self::new(kind, doc_ids, Matrix::from_vec(rows.len(), dim, data))
    }

    pub fn dim(&self) -> usize {
        self.values.cols()
    }

    pub fn len(&self) -> usize {
        self.doc_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.doc_ids.is_empty()
    }

    pub fn doc_ids(&self) -> &[DocId] {
        &self.doc_ids
    }

    pub fn values(&self) -> &Matrix {
        &self.values
    }

    pub fn row(&self, i: usize) -> &[f64] {
        self.values.row(i)
    }

    pub fn get(&self, id: DocId) -> Option<&[f64]> {
        self.index.get(&id).map(|&r| self.values.row(r))
    }

    pub fn require(&self, id: DocId) -> Result<&[f64]> {
        self.get(id)
            .ok_or_else(|| Error::InvalidArgument(format!("document {id} missing from {} features", self.kind)))
    }

    /// Rows for `ids`, in that order.
    pub fn select(&self, ids: &[DocId]) -> Result<FeatureMatrix> {
        let mut data = Vec::with_capacity(ids.len() * self.dim());
        for &id in ids {
            data.extend_from_slice(self.require(id)?);
        }
        FeatureMatrix::new(self.kind, ids.to_vec(), Matrix::from_vec(ids.len(), self.dim(), data))
    }

    /// Write `doc_id,v0,...` CSV. Floats use the shortest round-trip form.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut line = String::from("doc_id");
        for c in 0..self.dim() {
            line.push_str(&format!(",v{c}"));
        }
        line.push('\n');
        w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        for (r, id) in self.doc_ids.iter().enumerate() {
            line.clear();
            line.push_str(&id.to_string());
            for v in self.values.row(r) {
                line.push(',');
                line.push_str(&format!("{v:?}"));
            }
            line.push('\n');
            w.write_all(line.as_bytes()).map_err(|e| Error::io(path, e))?;
        }
        w.flush().map_err(|e| Error::io(path, e))
    }

    pub fn read_csv(path: &Path, kind: FeatureKind) -> Result<Self> {
        let mut reader = csv::ReaderBuilder::new()
            .has_headers(true)
            .from_path(path)
            .map_err(|e| csv_error(path, 1, e))?;
        let headers = reader.headers().map_err(|e| csv_error(path, 1, e))?.clone();
        if headers.get(0) != Some("doc_id") {
            return Err(Error::format(path, 1, "header must start with doc_id"));
        }
        let dim = headers.len() - 1;
        let mut ids = Vec::new();
        let mut data = Vec::new();
        for (i, rec) in reader.records().enumerate() {
            let line = i + 2;
            let rec = rec.map_err(|e| csv_error(path, line, e))?;
            if rec.len() != dim + 1 {
                return Err(Error::format(path, line, format!("expected {} fields, got {}", dim + 1, rec.len())));
            }
            ids.push(
                rec[0]
                    .parse::<DocId>()
                    .map_err(|e| Error::format(path, line, format!("bad doc_id: {e}")))?,
            );
            for f in rec.iter().skip(1) {
                data.push(
                    f.parse::<f64>()
                        .map_err(|e| Error::format(path, line, format!("bad value '{f}': {e}")))?,
                );
            }
        }
        let n = ids.len();
        Self::new(kind, ids, Matrix::from_vec(n, dim, data))
    }
}

pub(crate) fn csv_error(path: &Path, line: usize, e: csv::Error) -> Error {
    Error::format(path, line, e.to_string())
}

/// JSON sidecar written next to every persisted feature matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MatrixSidecar {
    pub kind: FeatureKind,
    pub dim: usize,
    pub split_seed: u64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub source: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

pub fn sidecar_path(csv_path: &Path) -> PathBuf {
    csv_path.with_extension("json")
}

pub fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut s = serde_json::to_string_pretty(value).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    s.push('\n');
    std::fs::write(path, s).map_err(|e| Error::io(path, e))
}

pub fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T> {
    let s = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    serde_json::from_str(&s).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })
}
