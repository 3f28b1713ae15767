use std::collections::HashSet;
use std::fs;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use super::PipelineConfig;
use crate::classify::{
    f1_report, Classifier, ClassifierKind, DecisionTree, EvalReport, Knn, LabeledDataset, LinearSvm, Mlp,
    RandomForest, SweepRow,
};
use crate::corpus::{load_corpus, split, Corpus, DocId, Document, LoadOptions, SplitName, SplitResult, Vocabulary};
use crate::error::{Error, Result};
use crate::features::{
    average_embedding, load_word_vectors, read_json, sidecar_path, write_json, DocVector, FeatureKind,
    FeatureMatrix, LdaConfig, LdaModel, LsaModel, MatrixSidecar, TfidfModel,
};
use crate::linalg::Matrix;
use crate::pairs::{generate_pairs, labeled_ids, PairRequest, PairSet};
use crate::siamese::{mse_loss, read_model, train, write_model, SiameseParams};
use crate::stopwords::StopWords;
use crate::viz::{export_scatter, tsne};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CachedDocument {
    pub id: DocId,
    pub source: String,
    pub label: String,
    pub tokens: Vec<String>,
}

/// Tokenised corpus written by `prepare` and read by later stages.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorpusCache {
    pub root: String,
    pub labels: Vec<String>,
    pub documents: Vec<CachedDocument>,
}

impl CorpusCache {
    fn from_corpus(root: &Path, corpus: &Corpus) -> Self {
        Self {
            root: root.display().to_string(),
            labels: corpus.labels.clone(),
            documents: corpus
                .documents
                .iter()
                .map(|d| CachedDocument {
                    id: d.id,
                    source: d.source.clone(),
                    label: d.label.clone(),
                    tokens: d.tokens.clone(),
                })
                .collect(),
        }
    }

    /// Rebuild a corpus; raw text is not cached and comes back empty.
    pub fn into_corpus(self) -> Corpus {
        Corpus {
            labels: self.labels,
            documents: self
                .documents
                .into_iter()
                .map(|d| Document {
                    id: d.id,
                    source: d.source,
                    label: d.label,
                    raw_text: String::new(),
                    tokens: d.tokens,
                })
                .collect(),
        }
    }
}

/// One conventional feature matrix produced by `featurize`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureEntry {
    pub kind: FeatureKind,
    /// Grid dimension label (the vector width for AVG).
    pub requested_dim: usize,
    pub dim: usize,
    /// Path relative to the output directory.
    pub file: String,
}

impl FeatureEntry {
    fn stem(&self) -> String {
        format!("{}_{}", self.kind, self.requested_dim)
    }
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct FeatureManifest {
    pub entries: Vec<FeatureEntry>,
}

fn out_path(cfg: &PipelineConfig, rel: &str) -> PathBuf {
    cfg.out_dir().join(rel)
}

fn ensure_dir(path: &Path) -> Result<()> {
    fs::create_dir_all(path).map_err(|e| Error::io(path, e))
}

/// The config sections that determine a stage's output.
fn echo(cfg: &PipelineConfig, sections: &[&str]) -> Value {
    let full = serde_json::to_value(cfg).expect("config serialises");
    let mut out = serde_json::Map::new();
    out.insert("seed".into(), full["seed"].clone());
    for s in sections {
        out.insert((*s).into(), full[*s].clone());
    }
    Value::Object(out)
}

fn load_state(cfg: &PipelineConfig) -> Result<(Corpus, SplitResult)> {
    let cache: CorpusCache = read_json(&out_path(cfg, "corpus.json"))?;
    let split: SplitResult = read_json(&out_path(cfg, "split.json"))?;
    Ok((cache.into_corpus(), split))
}

fn read_manifest(cfg: &PipelineConfig) -> Result<FeatureManifest> {
    read_json(&out_path(cfg, "features/manifest.json"))
}

fn labels_of(corpus: &Corpus, ids: &[DocId]) -> Vec<String> {
    ids.iter().map(|&i| corpus.label_of(i).to_string()).collect()
}

pub fn cmd_prepare(cfg: &PipelineConfig) -> Result<()> {
    let root = cfg.corpus_root()?;
    let corpus = load_corpus(
        &root,
        LoadOptions {
            lossy_decode: cfg.corpus.lossy_decode,
        },
    )?;
    let split = split(&corpus, cfg.corpus.fractions, cfg.seed)?;
    ensure_dir(cfg.out_dir())?;
    write_json(&out_path(cfg, "split.json"), &split)?;
    write_json(&out_path(cfg, "split.config.json"), &echo(cfg, &["corpus"]))?;
    let cache_path = out_path(cfg, "corpus.json");
    let cache = serde_json::to_string(&CorpusCache::from_corpus(&root, &corpus)).map_err(|e| Error::Json {
        path: cache_path.clone(),
        source: e,
    })?;
    fs::write(&cache_path, cache + "\n").map_err(|e| Error::io(&cache_path, e))?;
    log::info!(
        "prepared {} documents in {} classes: train {}, test {}, validation {}",
        corpus.len(),
        corpus.labels.len(),
        split.train.len(),
        split.test.len(),
        split.validation.len()
    );
    Ok(())
}

fn vocab_limit(n: usize) -> usize {
    if n == 0 {
        usize::MAX
    } else {
        n
    }
}

pub fn cmd_featurize(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let (corpus, split) = load_state(cfg)?;
    let f = &cfg.features;
    let train_docs = corpus.tokens_of(&split.train);
    let ids = corpus.all_ids();
    let all_docs = corpus.tokens_of(&ids);
    let english = StopWords::english();
    let stop_for = |k: FeatureKind| f.stopwords.contains(&k).then_some(&english);
    ensure_dir(&out_path(cfg, "features"))?;
    let config = echo(cfg, &["corpus", "features"]);

    let mut manifest = FeatureManifest::default();
    let mut emit = |kind: FeatureKind, requested_dim: usize, rows: Vec<DocVector>, dim: usize, source: Option<String>| {
        let entry = FeatureEntry {
            kind,
            requested_dim,
            dim,
            file: format!("features/{kind}_{requested_dim}.csv"),
        };
        let m = FeatureMatrix::from_rows(kind, ids.clone(), rows, dim)?;
        let path = out_path(cfg, &entry.file);
        m.write_csv(&path)?;
        write_json(
            &sidecar_path(&path),
            &MatrixSidecar {
                kind,
                dim,
                split_seed: split.seed,
                source,
                config: Some(config.clone()),
            },
        )?;
        log::info!("wrote {} ({} × {dim})", entry.file, m.len());
        manifest.entries.push(entry);
        Ok::<(), Error>(())
    };

    let mut seen = HashSet::new();
    for &kind in f.kinds.iter().filter(|k| seen.insert(**k)) {
        match kind {
            FeatureKind::Tfidf => {
                for &dim in &f.dims {
                    let vocab = Vocabulary::build(train_docs.iter().copied(), dim, stop_for(kind))?;
                    if vocab.len() < dim {
                        log::warn!("tfidf: only {} training terms available for dim {dim}", vocab.len());
                    }
                    let model = TfidfModel::fit(&train_docs, vocab)?;
                    let rows = all_docs.par_iter().map(|d| model.transform(d)).collect();
                    emit(kind, dim, rows, model.dim(), None)?;
                }
            }
            FeatureKind::Lsa => {
                let vocab = Vocabulary::build(train_docs.iter().copied(), vocab_limit(f.vocab_size), stop_for(kind))?;
                let tfidf = TfidfModel::fit(&train_docs, vocab)?;
                for &dim in &f.dims {
                    let model = LsaModel::fit(tfidf.clone(), &train_docs, dim)?;
                    let rows = all_docs
                        .par_iter()
                        .map(|d| model.transform_tokens(d))
                        .collect::<Result<Vec<_>>>()?;
                    emit(kind, dim, rows, model.dim(), None)?;
                }
            }
            FeatureKind::Lda => {
                let vocab = Vocabulary::build(train_docs.iter().copied(), vocab_limit(f.vocab_size), stop_for(kind))?;
                for &dim in &f.dims {
                    let lda_cfg = LdaConfig {
                        alpha: f.lda_alpha.unwrap_or(50.0 / dim as f64),
                        beta: f.lda_beta,
                        iters: f.lda_iters,
                        seed: cfg.seed,
                        ..LdaConfig::with_topics(dim)
                    };
                    let model = LdaModel::fit(&train_docs, vocab.clone(), lda_cfg)?;
                    let rows = ids
                        .par_iter()
                        .zip(&all_docs)
                        .map(|(&id, d)| model.transform(d, f.lda_fold_in_iters, cfg.seed.wrapping_add(id as u64)))
                        .collect();
                    emit(kind, dim, rows, dim, None)?;
                }
            }
            FeatureKind::Avg => {
                let rel = f.word_vectors.as_deref().expect("validated");
                let path = cfg.data_path(rel);
                let keep: HashSet<String> = all_docs.iter().flat_map(|d| d.iter().cloned()).collect();
                let table = load_word_vectors(&path, None, Some(&keep))?;
                let stop = stop_for(kind).cloned().unwrap_or_else(StopWords::empty);
                let rows = all_docs.par_iter().map(|d| average_embedding(d, &table, &stop)).collect();
                emit(kind, table.dim(), rows, table.dim(), Some(rel.display().to_string()))?;
            }
            FeatureKind::Deep => unreachable!("rejected by validate"),
        }
    }
    write_json(&out_path(cfg, "features/manifest.json"), &manifest)
}

pub fn cmd_pairs(cfg: &PipelineConfig) -> Result<()> {
    let (corpus, split) = load_state(cfg)?;
    ensure_dir(&out_path(cfg, "pairs"))?;
    let p = &cfg.pairs;
    let config = echo(cfg, &["pairs"]);
    for (offset, (name, n)) in [
        (SplitName::Train, p.train),
        (SplitName::Validation, p.validation),
        (SplitName::Test, p.test),
    ]
    .into_iter()
    .enumerate()
    {
        let docs = labeled_ids(&corpus, split.ids(name));
        let request = PairRequest {
            n_pairs: n,
            balance: p.balance,
            seed: cfg.seed.wrapping_add(offset as u64),
            allow_self: p.allow_self,
        };
        let set = generate_pairs(&docs, name, request)?;
        set.write(&out_path(cfg, &format!("pairs/{}.csv", name.as_str())), Some(config.clone()))?;
        log::info!("{} pairs: {} ({} relevant)", name.as_str(), set.len(), set.n_relevant());
    }
    Ok(())
}

fn model_path(cfg: &PipelineConfig, entry: &FeatureEntry) -> PathBuf {
    out_path(cfg, &format!("models/deep_{}.model", entry.stem()))
}

fn deep_features_path(cfg: &PipelineConfig, entry: &FeatureEntry) -> PathBuf {
    out_path(cfg, &format!("features/deep_{}.csv", entry.stem()))
}

fn network_entries<'a>(cfg: &'a PipelineConfig, manifest: &'a FeatureManifest) -> impl Iterator<Item = &'a FeatureEntry> {
    manifest.entries.iter().filter(|e| cfg.network.inputs.contains(&e.kind))
}

fn pair_mse(params: &SiameseParams, pairs: &PairSet, features: &FeatureMatrix) -> Result<f64> {
    let scores = pairs
        .pairs
        .iter()
        .map(|p| params.score(features.require(p.a_id)?, features.require(p.b_id)?))
        .collect::<Result<Vec<_>>>()?;
    let targets: Vec<f64> = pairs.pairs.iter().map(|p| p.relevancy).collect();
    mse_loss(&scores, &targets)
}

pub fn cmd_train(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let manifest = read_manifest(cfg)?;
    let train_pairs = PairSet::read(&out_path(cfg, "pairs/train.csv"))?;
    let val_pairs = PairSet::read(&out_path(cfg, "pairs/validation.csv"))?;
    let test_pairs = PairSet::read(&out_path(cfg, "pairs/test.csv"))?;
    ensure_dir(&out_path(cfg, "models"))?;
    for entry in network_entries(cfg, &manifest) {
        let features = FeatureMatrix::read_csv(&out_path(cfg, &entry.file), entry.kind)?;
        let hidden = cfg.network.hidden.unwrap_or(features.dim());
        let combination = cfg.network.combination.unwrap_or(hidden);
        log::info!("training deep_{} (D={}, H={hidden}, C={combination})", entry.stem(), features.dim());
        let (params, trace) = train(&train_pairs, &features, &val_pairs, &cfg.train, hidden, combination)?;
        let test_mse = pair_mse(&params, &test_pairs, &features)?;
        let config = echo(cfg, &["pairs", "network", "train"]);
        let path = model_path(cfg, entry);
        write_model(&path, &params, &cfg.train, Some(json!({ "input": entry.file, "config": config })))?;
        let trace_csv = path.with_extension("trace.csv");
        fs::write(&trace_csv, trace.to_csv()).map_err(|e| Error::io(&trace_csv, e))?;
        write_json(
            &path.with_extension("trace.json"),
            &json!({
                "input": entry.file,
                "stop_reason": trace.stop_reason.as_str(),
                "best_iteration": trace.best_iteration,
                "best_val_mse": trace.best_val_mse,
                "initial_val_mse": trace.initial_val_mse(),
                "iterations_run": trace.iterations_run,
                "test_mse": test_mse,
                "config": config,
            }),
        )?;
        log::info!(
            "deep_{}: stopped ({}) after {} updates; val MSE {:.5} -> {:.5}; test MSE {:.5}",
            entry.stem(),
            trace.stop_reason.as_str(),
            trace.iterations_run,
            trace.initial_val_mse(),
            trace.best_val_mse,
            test_mse
        );
    }
    Ok(())
}

fn embed_entry(cfg: &PipelineConfig, entry: &FeatureEntry) -> Result<FeatureMatrix> {
    let features = FeatureMatrix::read_csv(&out_path(cfg, &entry.file), entry.kind)?;
    let (params, header) = read_model(&model_path(cfg, entry))?;
    if header.input_dim != features.dim() {
        return Err(Error::Dimension {
            expected: header.input_dim,
            got: features.dim(),
        });
    }
    params.embed(&features)
}

pub fn cmd_embed(cfg: &PipelineConfig) -> Result<()> {
    let manifest = read_manifest(cfg)?;
    let split: SplitResult = read_json(&out_path(cfg, "split.json"))?;
    for entry in network_entries(cfg, &manifest) {
        let deep = embed_entry(cfg, entry)?;
        let path = deep_features_path(cfg, entry);
        deep.write_csv(&path)?;
        write_json(
            &sidecar_path(&path),
            &MatrixSidecar {
                kind: FeatureKind::Deep,
                dim: deep.dim(),
                split_seed: split.seed,
                source: Some(format!("models/deep_{}.model", entry.stem())),
                config: Some(echo(cfg, &["network", "train"])),
            },
        )?;
        log::info!("wrote features/deep_{}.csv ({} × {})", entry.stem(), deep.len(), deep.dim());
    }
    Ok(())
}

/// A representation available for evaluation or projection.
struct Representation {
    name: String,
    dim: usize,
    features: FeatureMatrix,
}

fn load_representations(cfg: &PipelineConfig, manifest: &FeatureManifest) -> Result<(Vec<Representation>, Vec<String>)> {
    let mut reps = Vec::new();
    let mut skipped = Vec::new();
    for entry in &manifest.entries {
        reps.push(Representation {
            name: entry.kind.to_string(),
            dim: entry.requested_dim,
            features: FeatureMatrix::read_csv(&out_path(cfg, &entry.file), entry.kind)?,
        });
    }
    if cfg.evaluate.deep {
        for entry in network_entries(cfg, manifest) {
            let csv = deep_features_path(cfg, entry);
            let features = if csv.exists() {
                FeatureMatrix::read_csv(&csv, FeatureKind::Deep)?
            } else if model_path(cfg, entry).exists() {
                embed_entry(cfg, entry)?
            } else {
                log::warn!("no model for deep_{}; skipping its rows", entry.stem());
                skipped.push(format!("deep_{}", entry.stem()));
                continue;
            };
            reps.push(Representation {
                name: format!("deep_{}", entry.kind),
                dim: entry.requested_dim,
                features,
            });
        }
    }
    Ok((reps, skipped))
}

/// Column-wise z-scores using the training rows' mean and deviation.
fn standardize(train: &LabeledDataset, test: &FeatureMatrix) -> Result<(LabeledDataset, FeatureMatrix)> {
    let (n, d) = (train.len() as f64, train.dim());
    let mut mean = vec![0.0; d];
    for i in 0..train.len() {
        mean.iter_mut().zip(train.row(i)).for_each(|(m, v)| *m += v / n);
    }
    let mut sd = vec![0.0; d];
    for i in 0..train.len() {
        sd.iter_mut()
            .zip(train.row(i))
            .zip(&mean)
            .for_each(|((s, v), m)| *s += (v - m).powi(2) / n);
    }
    let sd: Vec<f64> = sd.into_iter().map(|v| if v > 0.0 { v.sqrt() } else { 1.0 }).collect();
    let scale = |m: &FeatureMatrix| {
        let values = Matrix::from_fn(m.len(), d, |r, c| (m.row(r)[c] - mean[c]) / sd[c]);
        FeatureMatrix::new(m.kind, m.doc_ids().to_vec(), values)
    };
    let labels: Vec<String> = (0..train.len()).map(|i| train.label(i).to_string()).collect();
    Ok((LabeledDataset::new(scale(&train.x)?, &labels)?, scale(test)?))
}

struct Cell {
    rep: usize,
    classifier: ClassifierKind,
    param: String,
    k: usize,
}

fn fit_classifier(cfg: &PipelineConfig, cell: &Cell, train: &LabeledDataset) -> Result<Box<dyn Classifier>> {
    let e = &cfg.evaluate;
    Ok(match cell.classifier {
        ClassifierKind::Knn => Box::new(Knn::fit(train.clone(), cell.k)?),
        ClassifierKind::Svm => Box::new(LinearSvm::fit(train, e.svm)?),
        ClassifierKind::Dtree => Box::new(DecisionTree::fit(train, e.tree)?),
        ClassifierKind::Rforest => Box::new(RandomForest::fit(train, e.forest)?),
        ClassifierKind::Mlp => Box::new(Mlp::fit(train, e.mlp)?),
    })
}

fn param_label(cfg: &PipelineConfig, kind: ClassifierKind) -> String {
    let e = &cfg.evaluate;
    match kind {
        ClassifierKind::Knn => unreachable!("k is set per cell"),
        ClassifierKind::Svm => format!("reg={:?}", e.svm.reg),
        ClassifierKind::Dtree => match e.tree.max_depth {
            Some(d) => format!("max_depth={d}"),
            None => "max_depth=none".into(),
        },
        ClassifierKind::Rforest => format!("n_trees={}", e.forest.n_trees),
        ClassifierKind::Mlp => format!("hidden={}", e.mlp.hidden),
    }
}

pub fn cmd_evaluate(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    let (corpus, split) = load_state(cfg)?;
    let manifest = read_manifest(cfg)?;
    let (reps, skipped) = load_representations(cfg, &manifest)?;
    let train_labels = labels_of(&corpus, &split.train);
    let gold = labels_of(&corpus, &split.test);

    let data = reps
        .iter()
        .map(|r| {
            let train = LabeledDataset::new(r.features.select(&split.train)?, &train_labels)?;
            Ok((train, r.features.select(&split.test)?))
        })
        .collect::<Result<Vec<_>>>()?;

    let mut cells = Vec::new();
    for rep in 0..reps.len() {
        for &classifier in &cfg.evaluate.classifiers {
            if classifier == ClassifierKind::Knn {
                for &k in &cfg.evaluate.knn_k {
                    cells.push(Cell { rep, classifier, param: format!("k={k}"), k });
                }
            } else {
                let param = param_label(cfg, classifier);
                cells.push(Cell { rep, classifier, param, k: 0 });
            }
        }
    }

    let results: Vec<(SweepRow, EvalReport)> = cells
        .par_iter()
        .map(|cell| {
            let (train, test) = &data[cell.rep];
            let scaled = matches!(cell.classifier, ClassifierKind::Svm | ClassifierKind::Mlp) && cfg.evaluate.standardize;
            let pred = if scaled {
                let (train, test) = standardize(train, test)?;
                fit_classifier(cfg, cell, &train)?.predict_all(&test)
            } else {
                fit_classifier(cfg, cell, train)?.predict_all(test)
            };
            let report = f1_report(&pred, &gold, &corpus.labels)?;
            let rep = &reps[cell.rep];
            let row = SweepRow {
                representation: rep.name.clone(),
                dim: rep.dim,
                classifier: cell.classifier.as_str().into(),
                param: cell.param.clone(),
                macro_f1: report.macro_f1,
            };
            Ok((row, report))
        })
        .collect::<Result<_>>()?;

    ensure_dir(&out_path(cfg, "eval/reports"))?;
    let mut csv = String::from("representation,dim,classifier,param,macro_f1\n");
    for (row, report) in &results {
        csv.push_str(&format!(
            "{},{},{},{},{:?}\n",
            row.representation, row.dim, row.classifier, row.param, row.macro_f1
        ));
        let name = format!(
            "eval/reports/{}_{}_{}_{}.json",
            row.representation,
            row.dim,
            row.classifier,
            row.param.replace('=', "-")
        );
        write_json(&out_path(cfg, &name), &json!({ "row": row, "report": report }))?;
        log::info!(
            "{:<12} {:>4} {:<8} {:<16} macro-F1 {:.4}",
            row.representation,
            row.dim,
            row.classifier,
            row.param,
            row.macro_f1
        );
    }
    let sweep = out_path(cfg, "eval/sweep.csv");
    fs::write(&sweep, csv).map_err(|e| Error::io(&sweep, e))?;
    write_json(
        &out_path(cfg, "eval/sweep.json"),
        &json!({
            "rows": results.len(),
            "skipped": skipped,
            "config": echo(cfg, &["evaluate"]),
        }),
    )
}

pub fn cmd_tsne(cfg: &PipelineConfig) -> Result<()> {
    let (corpus, split) = load_state(cfg)?;
    let manifest = read_manifest(cfg)?;
    let (reps, _) = load_representations(cfg, &manifest)?;
    ensure_dir(&out_path(cfg, "tsne"))?;
    let labels = labels_of(&corpus, &split.test);
    for rep in &reps {
        let test = rep.features.select(&split.test)?;
        let result = tsne(test.values(), &cfg.tsne)?;
        let stem = format!("tsne/{}_{}", rep.name, rep.dim);
        export_scatter(
            &result.coords,
            test.doc_ids(),
            &labels,
            &out_path(cfg, &format!("{stem}.csv")),
            &out_path(cfg, &format!("{stem}.svg")),
        )?;
        let final_kl = *result.kl_history.last().expect("non-empty history");
        write_json(
            &out_path(cfg, &format!("{stem}.json")),
            &json!({
                "representation": rep.name,
                "dim": rep.dim,
                "points": test.len(),
                "initial_kl": result.kl_history[0],
                "final_kl": final_kl,
                "config": echo(cfg, &["tsne"]),
            }),
        )?;
        log::info!("{stem}: {} points, KL {:.4}", test.len(), final_kl);
    }
    Ok(())
}

/// Every stage in order.
pub fn cmd_all(cfg: &PipelineConfig) -> Result<()> {
    cfg.validate()?;
    cmd_prepare(cfg)?;
    cmd_featurize(cfg)?;
    cmd_pairs(cfg)?;
    cmd_train(cfg)?;
    cmd_embed(cfg)?;
    cmd_evaluate(cfg)?;
    cmd_tsne(cfg)
}
