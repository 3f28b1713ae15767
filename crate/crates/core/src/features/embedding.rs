use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader};
use std::path::Path;

use super::DocVector;
use crate::error::{Error, Result};
use crate::stopwords::StopWords;

/// Pretrained word vectors.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct EmbeddingTable {
    dim: usize,
    index: HashMap<String, usize>,
    data: Vec<f64>,
}

impl EmbeddingTable {
    pub fn new(dim: usize) -> Self {
        Self {
            dim,
            ..Default::default()
        }
    }

    pub fn insert(&mut self, word: impl Into<String>, vector: &[f64]) -> Result<()> {
        if vector.len() != self.dim {
            return Err(Error::Dimension {
                expected: self.dim,
                got: vector.len(),
            });
        }
        let word = word.into();
        match self.index.get(&word) {
            Some(&i) => self.data[i * self.dim..(i + 1) * self.dim].copy_from_slice(vector),
            None => {
                self.index.insert(word, self.index.len());
                self.data.extend_from_slice(vector);
            }
        }
        Ok(())
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn len(&self) -> usize {
        self.index.len()
    }

    pub fn is_empty(&self) -> bool {
        self.index.is_empty()
    }

    pub fn get(&self, word: &str) -> Option<&[f64]> {
        self.index
            .get(word)
            .map(|&i| &self.data[i * self.dim..(i + 1) * self.dim])
    }

    pub fn scaled(&self, c: f64) -> Self {
        Self {
            dim: self.dim,
            index: self.index.clone(),
            data: self.data.iter().map(|v| v * c).collect(),
        }
    }
}

/// Load a GloVe-style text file: `word v1 ... vd` per line.
///
/// The dimension comes from the first vector line (a leading `count dim`
/// header line is skipped) and is checked against `expected_dim` before the
/// rest of the file is read. When `keep` is given only those words are
/// stored, though every line is still checked for a consistent field count.
pub fn load_word_vectors(
    path: &Path,
    expected_dim: Option<usize>,
    keep: Option<&HashSet<String>>,
) -> Result<EmbeddingTable> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let reader = BufReader::new(file);
    let mut table: Option<EmbeddingTable> = None;
    let mut buf = Vec::new();
    for (i, line) in reader.lines().enumerate() {
        let line_no = i + 1;
        let line = line.map_err(|e| Error::io(path, e))?;
        let line = line.trim_end();
        if line.is_empty() {
            continue;
        }
        let mut fields = line.split_ascii_whitespace();
        let word = fields.next().expect("non-empty line has a field");
        let n_values = fields.clone().count();

        if table.is_none() && n_values == 1 && word.parse::<u64>().is_ok() {
            let rest = line.split_ascii_whitespace().nth(1).unwrap_or("");
            if rest.parse::<u64>().is_ok() {
                continue;
            }
        }
        let t = match &mut table {
            Some(t) => t,
            None => {
                if n_values == 0 {
                    return Err(Error::format(path, line_no, "line has a word but no vector"));
                }
                if let Some(want) = expected_dim {
                    if want != n_values {
                        return Err(Error::format(
                            path,
                            line_no,
                            format!("expected {want}-dimensional vectors, file has {n_values}"),
                        ));
                    }
                }
                table.insert(EmbeddingTable::new(n_values))
            }
        };
        if n_values != t.dim {
            return Err(Error::format(
                path,
                line_no,
                format!("expected {} values, found {n_values}", t.dim),
            ));
        }
        if keep.is_some_and(|k| !k.contains(word)) {
            continue;
        }
        buf.clear();
        for f in fields {
            buf.push(
                f.parse::<f64>()
                    .map_err(|e| Error::format(path, line_no, format!("bad number '{f}': {e}")))?,
            );
        }
        t.insert(word, &buf)?;
    }
    table.ok_or_else(|| Error::format(path, 1, "no word vectors found"))
}

/// Mean of the vectors of in-vocabulary, non-stop-word tokens; zero if none contribute.
pub fn average_embedding(doc: &[String], table: &EmbeddingTable, stopwords: &StopWords) -> DocVector {
    let mut sum = vec![0.0; table.dim()];
    let mut n = 0usize;
    for t in doc {
        if stopwords.contains(t) {
            continue;
        }
        if let Some(v) = table.get(t) {
            for (s, x) in sum.iter_mut().zip(v) {
                *s += x;
            }
            n += 1;
        }
    }
    if n > 0 {
        let n = n as f64;
        sum.iter_mut().for_each(|s| *s /= n);
    }
    sum
}
