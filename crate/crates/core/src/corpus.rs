//! Corpus ingestion, tokenisation, vocabulary and stratified splits.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::stopwords::StopWords;

pub type DocId = usize;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Document {
    pub id: DocId,
    /// Path relative to the corpus root, `<class>/<file>`.
    pub source: String,
    pub label: String,
    pub raw_text: String,
    pub tokens: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Corpus {
    pub documents: Vec<Document>,
    /// Sorted class names.
    pub labels: Vec<String>,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct LoadOptions {
    /// Replace invalid UTF-8 sequences instead of failing on them.
    pub lossy_decode: bool,
}

/// Lowercase, split on every character outside `[a-zA-Z]`, drop empties.
pub fn preprocess(raw_text: &str) -> Vec<String> {
    raw_text
        .split(|c: char| !c.is_ascii_alphabetic())
        .filter(|t| !t.is_empty())
        .map(|t| t.to_ascii_lowercase())
        .collect()
}

fn sorted_entries(dir: &Path) -> Result<Vec<(String, PathBuf)>> {
    let mut out = Vec::new();
    for entry in fs::read_dir(dir).map_err(|e| Error::io(dir, e))? {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let name = entry.file_name().to_string_lossy().into_owned();
        if name.starts_with('.') {
            continue;
        }
        out.push((name, entry.path()));
    }
    out.sort();
    Ok(out)
}

/// Load `<root>/<class>/<file>` into a corpus. Ids follow lexicographic
/// `(class, filename)` order.
pub fn load_corpus(root: &Path, options: LoadOptions) -> Result<Corpus> {
    if !root.is_dir() {
        return Err(Error::Corpus(format!(
            "corpus root {} is not a directory",
            root.display()
        )));
    }
    let mut files = Vec::new();
    let mut labels = Vec::new();
    for (class, class_path) in sorted_entries(root)? {
        if !class_path.is_dir() {
            continue;
        }
        let mut any = false;
        for (name, path) in sorted_entries(&class_path)? {
            if path.is_file() {
                files.push((class.clone(), format!("{class}/{name}"), path));
                any = true;
            }
        }
        if any {
            labels.push(class);
        }
    }
    if files.is_empty() {
        return Err(Error::Corpus(format!(
            "no documents found under {}",
            root.display()
        )));
    }

    let texts: Vec<String> = files
        .par_iter()
        .map(|(_, _, path)| read_text(path, options))
        .collect::<Result<_>>()?;

    let documents = files
        .into_iter()
        .zip(texts)
        .enumerate()
        .map(|(id, ((label, source, _), raw_text))| Document {
            id,
            source,
            label,
            tokens: preprocess(&raw_text),
            raw_text,
        })
        .collect();
    Ok(Corpus { documents, labels })
}

fn read_text(path: &Path, options: LoadOptions) -> Result<String> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    match String::from_utf8(bytes) {
        Ok(s) => Ok(s),
        Err(e) if options.lossy_decode => {
            log::warn!("{}: invalid UTF-8, decoding lossily", path.display());
            Ok(String::from_utf8_lossy(e.as_bytes()).into_owned())
        }
        Err(_) => Err(Error::Decode {
            path: path.to_path_buf(),
        }),
    }
}

impl Corpus {
    /// Build a corpus from in-memory `(label, text)` pairs, ids in the given order.
    pub fn from_texts<L: Into<String>, T: Into<String>>(items: impl IntoIterator<Item = (L, T)>) -> Self {
        let documents: Vec<Document> = items
            .into_iter()
            .enumerate()
            .map(|(id, (label, text))| {
                let raw_text = text.into();
                Document {
                    id,
                    source: format!("mem/{id}"),
                    label: label.into(),
                    tokens: preprocess(&raw_text),
                    raw_text,
                }
            })
            .collect();
        let labels: Vec<String> = documents
            .iter()
            .map(|d| d.label.clone())
            .collect::<std::collections::BTreeSet<_>>()
            .into_iter()
            .collect();
        Self { documents, labels }
    }

    pub fn len(&self) -> usize {
        self.documents.len()
    }

    pub fn is_empty(&self) -> bool {
        self.documents.is_empty()
    }

    pub fn doc(&self, id: DocId) -> &Document {
        &self.documents[id]
    }

    pub fn label_of(&self, id: DocId) -> &str {
        &self.documents[id].label
    }

    pub fn tokens_of(&self, ids: &[DocId]) -> Vec<&[String]> {
        ids.iter().map(|&i| self.documents[i].tokens.as_slice()).collect()
    }

    pub fn all_ids(&self) -> Vec<DocId> {
        (0..self.documents.len()).collect()
    }
}

/// Disjoint train/test/validation partition of corpus ids.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitResult {
    pub seed: u64,
    pub train: Vec<DocId>,
    pub test: Vec<DocId>,
    pub validation: Vec<DocId>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SplitName {
    Train,
    Test,
    Validation,
}

impl SplitName {
    pub fn as_str(self) -> &'static str {
        match self {
            SplitName::Train => "train",
            SplitName::Test => "test",
            SplitName::Validation => "validation",
        }
    }
}

impl SplitResult {
    pub fn ids(&self, which: SplitName) -> &[DocId] {
        match which {
            SplitName::Train => &self.train,
            SplitName::Test => &self.test,
            SplitName::Validation => &self.validation,
        }
    }
}

/// Default fractions: the 1803/221/201 partition of a 2225-document corpus.
pub const DEFAULT_FRACTIONS: [f64; 3] = [1803.0 / 2225.0, 221.0 / 2225.0, 201.0 / 2225.0];

/// Stratified split with fractions ordered `(train, test, validation)`.
///
/// Per class, the test and validation counts are the rounded fractions of the
/// class size (at least one each); the remainder goes to train.
pub fn split(corpus: &Corpus, fractions: [f64; 3], seed: u64) -> Result<SplitResult> {
    if fractions.iter().any(|&f| !(f > 0.0 && f < 1.0)) {
        return Err(Error::InvalidArgument(format!(
            "split fractions must each lie in (0, 1), got {fractions:?}"
        )));
    }
    let total: f64 = fractions.iter().sum();
    if (total - 1.0).abs() > 1e-9 {
        return Err(Error::InvalidArgument(format!(
            "split fractions must sum to 1, got {total}"
        )));
    }

    let mut by_label: BTreeMap<&str, Vec<DocId>> = BTreeMap::new();
    for d in &corpus.documents {
        by_label.entry(d.label.as_str()).or_default().push(d.id);
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut result = SplitResult {
        seed,
        train: Vec::new(),
        test: Vec::new(),
        validation: Vec::new(),
    };
    for (label, mut ids) in by_label {
        let n = ids.len();
        let n_test = ((n as f64 * fractions[1]).round() as usize).max(1);
        let n_val = ((n as f64 * fractions[2]).round() as usize).max(1);
        if n < n_test + n_val + 1 {
            return Err(Error::Corpus(format!(
                "class '{label}' has {n} documents; need at least {} to populate every subset",
                n_test + n_val + 1
            )));
        }
        ids.shuffle(&mut rng);
        result.test.extend_from_slice(&ids[..n_test]);
        result.validation.extend_from_slice(&ids[n_test..n_test + n_val]);
        result.train.extend_from_slice(&ids[n_test + n_val..]);
    }
    result.train.sort_unstable();
    result.test.sort_unstable();
    result.validation.sort_unstable();
    Ok(result)
}

/// Term index ranked by document frequency (ties lexicographic).
#[derive(Debug, Clone, PartialEq)]
pub struct Vocabulary {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs: usize,
    term_to_index: HashMap<String, usize>,
}

#[derive(Serialize, Deserialize)]
struct VocabularyRepr {
    terms: Vec<String>,
    doc_freq: Vec<usize>,
    n_docs: usize,
}

impl Serialize for Vocabulary {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        VocabularyRepr {
            terms: self.terms.clone(),
            doc_freq: self.doc_freq.clone(),
            n_docs: self.n_docs,
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Vocabulary {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let r = VocabularyRepr::deserialize(d)?;
        Ok(Vocabulary::from_parts(r.terms, r.doc_freq, r.n_docs))
    }
}

impl Vocabulary {
    /// Rank terms of `docs` by document frequency and keep the top `max_terms`
    /// after removing `stopwords`. Pass training documents only to keep
    /// statistics free of test leakage.
    pub fn build<'a, I>(docs: I, max_terms: usize, stopwords: Option<&StopWords>) -> Result<Self>
    where
        I: IntoIterator<Item = &'a [String]>,
    {
        if max_terms == 0 {
            return Err(Error::InvalidArgument("max_terms must be at least 1".into()));
        }
        let mut df: HashMap<&str, usize> = HashMap::new();
        let mut n_docs = 0;
        let mut any_token = false;
        for tokens in docs {
            n_docs += 1;
            let unique: HashSet<&str> = tokens.iter().map(String::as_str).collect();
            any_token |= !unique.is_empty();
            for t in unique {
                if stopwords.is_some_and(|sw| sw.contains(t)) {
                    continue;
                }
                *df.entry(t).or_insert(0) += 1;
            }
        }
        if !any_token {
            return Err(Error::Corpus("cannot build a vocabulary: no tokens".into()));
        }
        if df.is_empty() {
            return Err(Error::Corpus(
                "cannot build a vocabulary: every token is a stop word".into(),
            ));
        }
        let mut ranked: Vec<(&str, usize)> = df.into_iter().collect();
        ranked.sort_by(|a, b| b.1.cmp(&a.1).then_with(|| a.0.cmp(b.0)));
        ranked.truncate(max_terms);
        let terms = ranked.iter().map(|(t, _)| t.to_string()).collect();
        let doc_freq = ranked.iter().map(|&(_, c)| c).collect();
        Ok(Self::from_parts(terms, doc_freq, n_docs))
    }

    fn from_parts(terms: Vec<String>, doc_freq: Vec<usize>, n_docs: usize) -> Self {
        let term_to_index = terms
            .iter()
            .enumerate()
            .map(|(i, t)| (t.clone(), i))
            .collect();
        Self {
            terms,
            doc_freq,
            n_docs,
            term_to_index,
        }
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn index_of(&self, term: &str) -> Option<usize> {
        self.term_to_index.get(term).copied()
    }

    pub fn term(&self, index: usize) -> &str {
        &self.terms[index]
    }

    pub fn terms(&self) -> &[String] {
        &self.terms
    }

    pub fn doc_freq(&self, index: usize) -> usize {
        self.doc_freq[index]
    }

    pub fn n_docs(&self) -> usize {
        self.n_docs
    }
}
