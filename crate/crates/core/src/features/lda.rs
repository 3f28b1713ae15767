//! Latent Dirichlet allocation by collapsed Gibbs sampling.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::DocVector;
use crate::corpus::Vocabulary;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LdaConfig {
    pub n_topics: usize,
    pub alpha: f64,
    pub beta: f64,
    pub iters: usize,
    pub seed: u64,
}

impl LdaConfig {
    /// `alpha = 50 / K`, `beta = 0.01`, 1000 sweeps.
    pub fn with_topics(n_topics: usize) -> Self {
        Self {
            n_topics,
            alpha: 50.0 / n_topics as f64,
            beta: 0.01,
            iters: 1000,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LdaModel {
    pub config: LdaConfig,
    pub vocabulary: Vocabulary,
    /// `K × V` topic-word distributions.
    pub phi: Matrix,
}

fn encode(doc: &[String], vocabulary: &Vocabulary) -> Vec<usize> {
    doc.iter().filter_map(|t| vocabulary.index_of(t)).collect()
}

/// Draw an index from unnormalised cumulative weights.
fn draw(cumulative: &[f64], rng: &mut ChaCha8Rng) -> usize {
    let total = *cumulative.last().expect("non-empty weights");
    let u = rng.random::<f64>() * total;
    cumulative.partition_point(|&c| c <= u).min(cumulative.len() - 1)
}

impl LdaModel {
    pub fn fit(train_docs: &[&[String]], vocabulary: Vocabulary, config: LdaConfig) -> Result<Self> {
        if config.n_topics == 0 || config.iters == 0 {
            return Err(Error::InvalidArgument("LDA needs at least one topic and one sweep".into()));
        }
        if !(config.alpha > 0.0 && config.beta > 0.0) {
            return Err(Error::InvalidArgument("LDA hyperparameters must be positive".into()));
        }
        let docs: Vec<Vec<usize>> = train_docs.iter().map(|d| encode(d, &vocabulary)).collect();
        if docs.iter().all(Vec::is_empty) {
            return Err(Error::Corpus("LDA training corpus has no in-vocabulary tokens".into()));
        }

        let k = config.n_topics;
        let v = vocabulary.len();
        let (alpha, beta) = (config.alpha, config.beta);
        let v_beta = v as f64 * beta;
        let mut rng = ChaCha8Rng::seed_from_u64(config.seed);

        // word-major topic counts: word_topic[w * k + t]
        let mut word_topic = vec![0u32; v * k];
        let mut topic_total = vec![0u32; k];
        let mut doc_topic = vec![0u32; docs.len() * k];
        let mut assignments: Vec<Vec<usize>> = Vec::with_capacity(docs.len());
        for (d, words) in docs.iter().enumerate() {
            let z: Vec<usize> = words.iter().map(|_| rng.random_range(0..k)).collect();
            for (&w, &t) in words.iter().zip(&z) {
                word_topic[w * k + t] += 1;
                topic_total[t] += 1;
                doc_topic[d * k + t] += 1;
            }
            assignments.push(z);
        }

        let mut cumulative = vec![0.0; k];
        for _ in 0..config.iters {
            for (d, words) in docs.iter().enumerate() {
                let dt = &mut doc_topic[d * k..(d + 1) * k];
                for (pos, &w) in words.iter().enumerate() {
                    let old = assignments[d][pos];
                    let wt = &mut word_topic[w * k..(w + 1) * k];
                    wt[old] -= 1;
                    topic_total[old] -= 1;
                    dt[old] -= 1;

                    let mut acc = 0.0;
                    for t in 0..k {
                        acc += (dt[t] as f64 + alpha) * (wt[t] as f64 + beta)
                            / (topic_total[t] as f64 + v_beta);
                        cumulative[t] = acc;
                    }
                    let new = draw(&cumulative, &mut rng);

                    wt[new] += 1;
                    topic_total[new] += 1;
                    dt[new] += 1;
                    assignments[d][pos] = new;
                }
            }
        }

        let mut phi = Matrix::zeros(k, v);
        for t in 0..k {
            let denom = topic_total[t] as f64 + v_beta;
            let row = phi.row_mut(t);
            for (w, p) in row.iter_mut().enumerate() {
                *p = (word_topic[w * k + t] as f64 + beta) / denom;
            }
            let s: f64 = row.iter().sum();
            for p in row.iter_mut() {
                *p /= s;
            }
        }
        Ok(Self {
            config,
            vocabulary,
            phi,
        })
    }

    pub fn n_topics(&self) -> usize {
        self.config.n_topics
    }

    /// Topic proportions of `doc` by fold-in Gibbs sampling with `phi` fixed.
    ///
    /// θ is averaged over the sweeps after the first half (burn-in). A document
    /// with no in-vocabulary token gets the uniform vector.
    pub fn transform(&self, doc: &[String], fold_in_iters: usize, seed: u64) -> DocVector {
        let k = self.n_topics();
        let alpha = self.config.alpha;
        let words = encode(doc, &self.vocabulary);
        if words.is_empty() {
            return vec![1.0 / k as f64; k];
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut counts = vec![0u32; k];
        let mut z: Vec<usize> = words.iter().map(|_| rng.random_range(0..k)).collect();
        for &t in &z {
            counts[t] += 1;
        }
        let iters = fold_in_iters.max(1);
        let burn_in = iters / 2;
        let mut theta = vec![0.0; k];
        let mut samples = 0usize;
        let mut cumulative = vec![0.0; k];
        let denom = words.len() as f64 + k as f64 * alpha;
        for sweep in 0..iters {
            for (pos, &w) in words.iter().enumerate() {
                counts[z[pos]] -= 1;
                let mut acc = 0.0;
                for t in 0..k {
                    acc += (counts[t] as f64 + alpha) * self.phi.get(t, w);
                    cumulative[t] = acc;
                }
                let new = draw(&cumulative, &mut rng);
                counts[new] += 1;
                z[pos] = new;
            }
            if sweep >= burn_in {
                for (th, &c) in theta.iter_mut().zip(&counts) {
                    *th += (c as f64 + alpha) / denom;
                }
                samples += 1;
            }
        }
        let s: f64 = theta.iter().sum();
        debug_assert!(samples > 0);
        theta.iter_mut().for_each(|t| *t /= s);
        theta
    }

    /// Indices of the `n` most probable words of `topic`.
    pub fn top_words(&self, topic: usize, n: usize) -> Vec<usize> {
        let row = self.phi.row(topic);
        let mut idx: Vec<usize> = (0..row.len()).collect();
        idx.sort_by(|&a, &b| row[b].total_cmp(&row[a]).then(a.cmp(&b)));
        idx.truncate(n);
        idx
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn docs_from(words: &[&[&str]]) -> Vec<Vec<String>> {
        words.iter().map(|d| d.iter().map(|s| s.to_string()).collect()).collect()
    }

    fn fit(docs: &[Vec<String>], config: LdaConfig) -> LdaModel {
        let refs: Vec<&[String]> = docs.iter().map(Vec::as_slice).collect();
        let vocab = Vocabulary::build(refs.iter().copied(), 1000, None).unwrap();
        LdaModel::fit(&refs, vocab, config).unwrap()
    }

    #[test]
    fn single_topic_theta_is_one() {
        let docs = docs_from(&[&["a", "b"], &["b", "c", "c"]]);
        let m = fit(&docs, LdaConfig { iters: 5, ..LdaConfig::with_topics(1) });
        for d in &docs {
            assert_eq!(m.transform(d, 10, 1), vec![1.0]);
        }
    }

    #[test]
    fn phi_rows_are_simplex() {
        let docs = docs_from(&[&["a", "b", "a"], &["c", "d"], &["a", "d", "e"]]);
        let m = fit(&docs, LdaConfig { iters: 20, seed: 4, ..LdaConfig::with_topics(3) });
        for t in 0..3 {
            let s: f64 = m.phi.row(t).iter().sum();
            assert!((s - 1.0).abs() < 1e-9);
            assert!(m.phi.row(t).iter().all(|&p| p >= 0.0));
        }
    }

    #[test]
    fn empty_and_oov_docs_get_uniform_theta() {
        let docs = docs_from(&[&["a", "b"], &["c", "d"]]);
        let m = fit(&docs, LdaConfig { iters: 5, ..LdaConfig::with_topics(4) });
        assert_eq!(m.transform(&[], 10, 0), vec![0.25; 4]);
        assert_eq!(m.transform(&docs_from(&[&["zzz"]])[0], 10, 0), vec![0.25; 4]);
    }

    #[test]
    fn fit_errors() {
        let docs = docs_from(&[&["a"]]);
        let refs: Vec<&[String]> = docs.iter().map(Vec::as_slice).collect();
        let vocab = Vocabulary::build(refs.iter().copied(), 10, None).unwrap();
        let empty: Vec<&[String]> = vec![&[]];
        assert!(LdaModel::fit(&empty, vocab.clone(), LdaConfig::with_topics(2)).is_err());
        assert!(LdaModel::fit(&refs, vocab, LdaConfig { iters: 0, ..LdaConfig::with_topics(2) }).is_err());
    }

    #[test]
    fn fit_is_reproducible() {
        let docs = docs_from(&[&["a", "b", "a"], &["c", "d"], &["a", "d", "e"]]);
        let c = LdaConfig { iters: 30, seed: 9, ..LdaConfig::with_topics(2) };
        assert_eq!(fit(&docs, c), fit(&docs, c));
    }
}
