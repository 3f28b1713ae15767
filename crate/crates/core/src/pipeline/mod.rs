//! File-based pipeline: configuration and the stages that read and write
//! artifacts under one output directory.
//!
//! Output layout:
//!
//! ```text
//! split.json, split.config.json, corpus.json
//! features/manifest.json, features/{kind}_{dim}.csv (+ .json sidecar)
//! pairs/{train,validation,test}.csv (+ .json sidecar)
//! models/deep_{kind}_{dim}.model, .trace.csv, .trace.json
//! features/deep_{kind}_{dim}.csv (+ .json sidecar)
//! eval/sweep.csv, eval/sweep.json, eval/reports/*.json
//! tsne/{representation}_{dim}.csv, .svg, .json
//! ```

mod stages;

use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::classify::{ClassifierKind, ForestParams, MlpParams, SvmParams, TreeParams};
use crate::corpus::DEFAULT_FRACTIONS;
use crate::error::{Error, Result};
use crate::features::FeatureKind;
use crate::siamese::TrainConfig;
use crate::viz::TsneConfig;

pub use stages::{
    cmd_all, cmd_embed, cmd_evaluate, cmd_featurize, cmd_pairs, cmd_prepare, cmd_train, cmd_tsne, CorpusCache,
    FeatureEntry, FeatureManifest,
};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct CorpusSection {
    /// `<root>/<class>/<file>` layout.
    pub root: Option<PathBuf>,
    pub lossy_decode: bool,
    /// `(train, test, validation)`.
    pub fractions: [f64; 3],
}

impl Default for CorpusSection {
    fn default() -> Self {
        Self {
            root: None,
            lossy_decode: true,
            fractions: DEFAULT_FRACTIONS,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct FeaturesSection {
    pub kinds: Vec<FeatureKind>,
    /// Dimensions for TFIDF, LSA and LDA. AVG uses the vector file's width.
    pub dims: Vec<usize>,
    pub word_vectors: Option<PathBuf>,
    /// Vocabulary size for LSA and LDA; 0 keeps every training term.
    pub vocab_size: usize,
    /// Representations whose vocabulary drops stop words.
    pub stopwords: Vec<FeatureKind>,
    /// Defaults to `50 / dim`.
    pub lda_alpha: Option<f64>,
    pub lda_beta: f64,
    pub lda_iters: usize,
    pub lda_fold_in_iters: usize,
}

impl Default for FeaturesSection {
    fn default() -> Self {
        Self {
            kinds: vec![FeatureKind::Tfidf, FeatureKind::Lsa, FeatureKind::Lda, FeatureKind::Avg],
            dims: vec![200],
            word_vectors: None,
            vocab_size: 0,
            stopwords: vec![FeatureKind::Avg],
            lda_alpha: None,
            lda_beta: 0.01,
            lda_iters: 1000,
            lda_fold_in_iters: 100,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PairsSection {
    pub train: usize,
    pub validation: usize,
    pub test: usize,
    pub balance: f64,
    pub allow_self: bool,
}

impl Default for PairsSection {
    fn default() -> Self {
        Self {
            train: 200_000,
            validation: 200,
            test: 800,
            balance: 0.5,
            allow_self: false,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct NetworkSection {
    /// Representations a Siamese model is trained on.
    pub inputs: Vec<FeatureKind>,
    /// Embedding width H; defaults to the input width.
    pub hidden: Option<usize>,
    /// Combination width C; defaults to H.
    pub combination: Option<usize>,
}

impl Default for NetworkSection {
    fn default() -> Self {
        Self {
            inputs: vec![FeatureKind::Tfidf, FeatureKind::Lsa, FeatureKind::Lda, FeatureKind::Avg],
            hidden: None,
            combination: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct EvaluateSection {
    pub classifiers: Vec<ClassifierKind>,
    pub knn_k: Vec<usize>,
    /// Include the Siamese representations in the grid.
    pub deep: bool,
    /// Z-score features with training statistics before SVM and MLP.
    pub standardize: bool,
    pub svm: SvmParams,
    pub tree: TreeParams,
    pub forest: ForestParams,
    pub mlp: MlpParams,
}

impl Default for EvaluateSection {
    fn default() -> Self {
        Self {
            classifiers: vec![
                ClassifierKind::Knn,
                ClassifierKind::Svm,
                ClassifierKind::Dtree,
                ClassifierKind::Rforest,
                ClassifierKind::Mlp,
            ],
            knn_k: vec![1, 5, 10, 15, 20],
            deep: true,
            standardize: true,
            svm: SvmParams::default(),
            tree: TreeParams::default(),
            forest: ForestParams::default(),
            mlp: MlpParams::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct OutputSection {
    pub dir: PathBuf,
}

impl Default for OutputSection {
    fn default() -> Self {
        Self { dir: PathBuf::from("out") }
    }
}

/// Whole-pipeline configuration. Every stage seed derives from `seed`;
/// seed keys inside sections are overwritten with it.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct PipelineConfig {
    pub seed: u64,
    /// Base directory for relative corpus and word-vector paths.
    pub data_dir: Option<PathBuf>,
    pub corpus: CorpusSection,
    pub features: FeaturesSection,
    pub pairs: PairsSection,
    pub network: NetworkSection,
    pub train: TrainConfig,
    pub evaluate: EvaluateSection,
    pub tsne: TsneConfig,
    pub output: OutputSection,
}

/// Parse the right-hand side of a `--set` override as a TOML value, falling
/// back to a bare string.
fn parse_value(raw: &str) -> toml::Value {
    match format!("v = {raw}").parse::<toml::Table>() {
        Ok(mut t) => t.remove("v").expect("key present"),
        Err(_) => toml::Value::String(raw.to_string()),
    }
}

/// Apply `section.key=value` (or `key=value`) to a TOML table.
pub fn apply_override(table: &mut toml::Table, assignment: &str) -> Result<()> {
    let (key, value) = assignment
        .split_once('=')
        .ok_or_else(|| Error::Config(format!("override '{assignment}' is not of the form key=value")))?;
    let path: Vec<&str> = key.trim().split('.').collect();
    if path.iter().any(|p| p.is_empty()) {
        return Err(Error::Config(format!("bad override key '{key}'")));
    }
    let mut node = table;
    for part in &path[..path.len() - 1] {
        let entry = node
            .entry(part.to_string())
            .or_insert_with(|| toml::Value::Table(toml::Table::new()));
        node = entry
            .as_table_mut()
            .ok_or_else(|| Error::Config(format!("override '{key}': '{part}' is not a section")))?;
    }
    node.insert(path[path.len() - 1].to_string(), parse_value(value.trim()));
    Ok(())
}

impl PipelineConfig {
    pub fn from_toml_str(text: &str) -> Result<Self> {
        Self::from_table(text.parse::<toml::Table>().map_err(|e| Error::Config(e.to_string()))?)
    }

    pub fn from_table(table: toml::Table) -> Result<Self> {
        let mut cfg: Self = toml::Value::Table(table)
            .try_into()
            .map_err(|e: toml::de::Error| Error::Config(e.to_string()))?;
        cfg.propagate_seed();
        Ok(cfg)
    }

    /// Read an optional config file, then apply overrides in order.
    pub fn load(path: Option<&Path>, overrides: &[String]) -> Result<Self> {
        let mut table = match path {
            Some(p) => fs::read_to_string(p)
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?
                .parse::<toml::Table>()
                .map_err(|e| Error::Config(format!("{}: {e}", p.display())))?,
            None => toml::Table::new(),
        };
        for o in overrides {
            apply_override(&mut table, o)?;
        }
        Self::from_table(table)
    }

    pub fn set_seed(&mut self, seed: u64) {
        self.seed = seed;
        self.propagate_seed();
    }

    fn propagate_seed(&mut self) {
        self.train.seed = self.seed;
        self.tsne.seed = self.seed;
        self.evaluate.svm.seed = self.seed;
        self.evaluate.tree.seed = self.seed;
        self.evaluate.forest.seed = self.seed;
        self.evaluate.forest.tree.seed = self.seed;
        self.evaluate.mlp.seed = self.seed;
    }

    pub fn validate(&self) -> Result<()> {
        let f = &self.features;
        if f.kinds.contains(&FeatureKind::Deep) || self.network.inputs.contains(&FeatureKind::Deep) {
            return Err(Error::Config("'deep' is produced by training, not listed as an input".into()));
        }
        if f.dims.contains(&0) {
            return Err(Error::Config("feature dimensions must be positive".into()));
        }
        if f.kinds.contains(&FeatureKind::Avg) && f.word_vectors.is_none() {
            return Err(Error::Config("features.kinds includes avg but features.word_vectors is not set".into()));
        }
        if self.network.hidden == Some(0) || self.network.combination == Some(0) {
            return Err(Error::Config("network widths must be positive".into()));
        }
        if self.evaluate.knn_k.contains(&0) {
            return Err(Error::Config("evaluate.knn_k values must be positive".into()));
        }
        self.train.validate().map_err(|e| Error::Config(e.to_string()))
    }

    /// Resolve a configured path against `data_dir` when it is relative.
    pub fn data_path(&self, p: &Path) -> PathBuf {
        match &self.data_dir {
            Some(base) if p.is_relative() => base.join(p),
            _ => p.to_path_buf(),
        }
    }

    pub fn corpus_root(&self) -> Result<PathBuf> {
        self.corpus
            .root
            .as_deref()
            .map(|p| self.data_path(p))
            .ok_or_else(|| Error::Config("corpus.root is not set".into()))
    }

    pub fn out_dir(&self) -> &Path {
        &self.output.dir
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_and_sections() {
        let cfg = PipelineConfig::from_toml_str(
            r#"
            seed = 7
            [corpus]
            root = "bbc"
            [features]
            kinds = ["tfidf", "lsa"]
            dims = [50, 100]
            [train]
            max_iters = 10
            seed = 99
            "#,
        )
        .unwrap();
        assert_eq!(cfg.features.dims, vec![50, 100]);
        assert_eq!(cfg.train.max_iters, 10);
        assert_eq!(cfg.train.seed, 7);
        assert_eq!(cfg.tsne.seed, 7);
        assert_eq!(cfg.pairs.train, 200_000);
        assert_eq!(cfg.evaluate.knn_k, vec![1, 5, 10, 15, 20]);
        assert!(cfg.corpus.lossy_decode);
        cfg.validate().unwrap();
    }

    #[test]
    fn unknown_keys_are_config_errors() {
        let e = PipelineConfig::from_toml_str("[train]\nlearning_rate = 1.0\n").unwrap_err();
        assert_eq!(e.exit_code(), 1);
        assert!(PipelineConfig::from_toml_str("[nope]\n").is_err());
        assert!(PipelineConfig::from_toml_str("seed = ").is_err());
    }

    #[test]
    fn overrides() {
        let mut t = toml::Table::new();
        apply_override(&mut t, "train.lr0=0.01").unwrap();
        apply_override(&mut t, "features.kinds=[\"tfidf\"]").unwrap();
        apply_override(&mut t, "corpus.root=/data/bbc").unwrap();
        apply_override(&mut t, "seed=3").unwrap();
        let cfg = PipelineConfig::from_table(t).unwrap();
        assert_eq!(cfg.train.lr0, 0.01);
        assert_eq!(cfg.features.kinds, vec![FeatureKind::Tfidf]);
        assert_eq!(cfg.corpus.root, Some(PathBuf::from("/data/bbc")));
        assert_eq!(cfg.seed, 3);
        let mut t = toml::Table::new();
        assert!(apply_override(&mut t, "novalue").is_err());
        assert!(apply_override(&mut t, "a..b=1").is_err());
    }

    #[test]
    fn validation_rules() {
        let mut cfg = PipelineConfig::default();
        assert!(cfg.validate().is_err(), "avg without vectors");
        cfg.features.word_vectors = Some("v.txt".into());
        cfg.validate().unwrap();
        cfg.network.inputs.push(FeatureKind::Deep);
        assert!(cfg.validate().is_err());
    }

    #[test]
    fn data_dir_resolution() {
        let cfg = PipelineConfig {
            data_dir: Some("/cache".into()),
            ..PipelineConfig::default()
        };
        assert_eq!(cfg.data_path(Path::new("bbc")), PathBuf::from("/cache/bbc"));
        assert_eq!(cfg.data_path(Path::new("/abs")), PathBuf::from("/abs"));
        assert!(cfg.corpus_root().is_err());
    }
}
