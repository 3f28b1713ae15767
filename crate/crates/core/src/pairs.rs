//! Relevant / non-relevant document pairs for Siamese training.

use std::collections::BTreeMap;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::corpus::{Corpus, DocId, SplitName};
use crate::error::{Error, Result};
use crate::features::{csv_error, sidecar_path, write_json};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DocumentPair {
    pub a_id: DocId,
    pub b_id: DocId,
    /// 1.0 when both documents share a label, else 0.0.
    pub relevancy: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct PairSet {
    pub pairs: Vec<DocumentPair>,
    pub source_split: SplitName,
    pub seed: u64,
    pub balance: f64,
    pub allow_self: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PairSetSidecar {
    pub split: SplitName,
    pub seed: u64,
    pub balance: f64,
    pub allow_self: bool,
    pub n_pairs: usize,
    pub n_relevant: usize,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub config: Option<serde_json::Value>,
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PairRequest {
    pub n_pairs: usize,
    pub balance: f64,
    pub seed: u64,
    pub allow_self: bool,
}

impl PairRequest {
    pub fn new(n_pairs: usize, seed: u64) -> Self {
        Self {
            n_pairs,
            balance: 0.5,
            seed,
            allow_self: false,
        }
    }
}

/// `(id, label)` list for one split of a corpus.
pub fn labeled_ids(corpus: &Corpus, ids: &[DocId]) -> Vec<(DocId, String)> {
    ids.iter().map(|&i| (i, corpus.label_of(i).to_string())).collect()
}

/// Weighted index sampler over cumulative integer weights.
struct Cumulative(Vec<u64>);

impl Cumulative {
    fn new(weights: impl IntoIterator<Item = u64>) -> Self {
        let mut acc = 0;
        Self(weights.into_iter().map(|w| {
            acc += w;
            acc
        }).collect())
    }

    fn total(&self) -> u64 {
        self.0.last().copied().unwrap_or(0)
    }

    fn sample(&self, rng: &mut ChaCha8Rng) -> usize {
        let u = rng.random_range(0..self.total());
        self.0.partition_point(|&c| c <= u)
    }
}

/// Sample `round(balance · n_pairs)` same-label ordered pairs uniformly (with
/// replacement) and the rest uniformly from different-label ordered pairs.
pub fn generate_pairs(
    split_docs: &[(DocId, String)],
    source_split: SplitName,
    request: PairRequest,
) -> Result<PairSet> {
    let PairRequest {
        n_pairs,
        balance,
        seed,
        allow_self,
    } = request;
    if n_pairs == 0 {
        return Err(Error::InvalidArgument("n_pairs must be at least 1".into()));
    }
    if !(balance > 0.0 && balance < 1.0) {
        return Err(Error::InvalidArgument(format!("balance must lie in (0, 1), got {balance}")));
    }

    let mut groups: BTreeMap<&str, Vec<DocId>> = BTreeMap::new();
    for (id, label) in split_docs {
        groups.entry(label.as_str()).or_default().push(*id);
    }
    let groups: Vec<(&str, Vec<DocId>)> = groups.into_iter().collect();
    let total_docs = split_docs.len() as u64;

    let n_relevant = (balance * n_pairs as f64).round() as usize;
    let n_irrelevant = n_pairs - n_relevant;

    let same_weights: Vec<u64> = groups
        .iter()
        .map(|(label, ids)| {
            let n = ids.len() as u64;
            let w = if allow_self { n * n } else { n * n.saturating_sub(1) };
            if w == 0 {
                log::warn!("label '{label}' has a single document; no relevant pairs drawn from it");
            }
            w
        })
        .collect();
    let same = Cumulative::new(same_weights);
    if n_relevant > 0 && same.total() == 0 {
        return Err(Error::InvalidArgument(
            "no label has enough documents to form a relevant pair".into(),
        ));
    }
    if n_irrelevant > 0 && groups.len() < 2 {
        return Err(Error::InvalidArgument(
            "non-relevant pairs need at least two labels in the split".into(),
        ));
    }

    // Flatten documents by label; first member weighted by the number of partners.
    let flat: Vec<(usize, DocId)> = groups
        .iter()
        .enumerate()
        .flat_map(|(g, (_, ids))| ids.iter().map(move |&id| (g, id)))
        .collect();
    let diff = Cumulative::new(
        flat.iter()
            .map(|&(g, _)| total_docs - groups[g].1.len() as u64),
    );

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut pairs = Vec::with_capacity(n_pairs);
    for _ in 0..n_relevant {
        let ids = &groups[same.sample(&mut rng)].1;
        let a = rng.random_range(0..ids.len());
        let b = if allow_self {
            rng.random_range(0..ids.len())
        } else {
            let b = rng.random_range(0..ids.len() - 1);
            if b >= a {
                b + 1
            } else {
                b
            }
        };
        pairs.push(DocumentPair {
            a_id: ids[a],
            b_id: ids[b],
            relevancy: 1.0,
        });
    }
    for _ in 0..n_irrelevant {
        let (ga, a_id) = flat[diff.sample(&mut rng)];
        let partners = total_docs as usize - groups[ga].1.len();
        let mut k = rng.random_range(0..partners);
        let mut b_id = None;
        for (g, (_, ids)) in groups.iter().enumerate() {
            if g == ga {
                continue;
            }
            if k < ids.len() {
                b_id = Some(ids[k]);
                break;
            }
            k -= ids.len();
        }
        pairs.push(DocumentPair {
            a_id,
            b_id: b_id.expect("partner index within range"),
            relevancy: 0.0,
        });
    }
    pairs.shuffle(&mut rng);

    Ok(PairSet {
        pairs,
        source_split,
        seed,
        balance,
        allow_self,
    })
}

impl PairSet {
    pub fn len(&self) -> usize {
        self.pairs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.pairs.is_empty()
    }

    pub fn n_relevant(&self) -> usize {
        self.pairs.iter().filter(|p| p.relevancy == 1.0).count()
    }

    pub fn sidecar(&self, config: Option<serde_json::Value>) -> PairSetSidecar {
        PairSetSidecar {
            split: self.source_split,
            seed: self.seed,
            balance: self.balance,
            allow_self: self.allow_self,
            n_pairs: self.len(),
            n_relevant: self.n_relevant(),
            config,
        }
    }

    /// Write `a_id,b_id,relevancy` CSV plus its JSON sidecar.
    pub fn write(&self, path: &Path, config: Option<serde_json::Value>) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut out = String::from("a_id,b_id,relevancy\n");
        for p in &self.pairs {
            out.push_str(&format!("{},{},{:?}\n", p.a_id, p.b_id, p.relevancy));
        }
        w.write_all(out.as_bytes())
            .and_then(|_| w.flush())
            .map_err(|e| Error::io(path, e))?;
        write_json(&sidecar_path(path), &self.sidecar(config))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let meta: PairSetSidecar = crate::features::read_json(&sidecar_path(path))?;
        let mut reader = csv::Reader::from_path(path).map_err(|e| csv_error(path, 1, e))?;
        let mut pairs = Vec::new();
        for (i, rec) in reader.deserialize::<DocumentPair>().enumerate() {
            pairs.push(rec.map_err(|e| csv_error(path, i + 2, e))?);
        }
        if pairs.len() != meta.n_pairs {
            return Err(Error::format(
                path,
                pairs.len() + 1,
                format!("sidecar records {} pairs, file has {}", meta.n_pairs, pairs.len()),
            ));
        }
        Ok(Self {
            pairs,
            source_split: meta.split,
            seed: meta.seed,
            balance: meta.balance,
            allow_self: meta.allow_self,
        })
    }
}
