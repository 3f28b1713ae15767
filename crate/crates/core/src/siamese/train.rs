use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{lrate, BranchMasks, DropoutMask, SiameseParams, TrainConfig};
use crate::error::{Error, Result};
use crate::features::FeatureMatrix;
use crate::pairs::{DocumentPair, PairSet};

/// Stream separator so the SGD order/dropout stream differs from the init stream.
const STREAM_SALT: u64 = 0x9E37_79B9_7F4A_7C15;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TraceRecord {
    pub iteration: usize,
    pub train_mse: f64,
    pub val_mse: f64,
    pub lr: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum StopReason {
    Patience,
    MaxIters,
}

impl StopReason {
    pub fn as_str(self) -> &'static str {
        match self {
            StopReason::Patience => "patience",
            StopReason::MaxIters => "max_iters",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrainTrace {
    pub records: Vec<TraceRecord>,
    pub stop_reason: StopReason,
    pub best_iteration: usize,
    pub best_val_mse: f64,
    /// Pair updates actually performed.
    pub iterations_run: usize,
}

impl TrainTrace {
    pub fn initial_val_mse(&self) -> f64 {
        self.records[0].val_mse
    }

    /// CSV body `iteration,train_mse,val_mse,lr`.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("iteration,train_mse,val_mse,lr\n");
        for r in &self.records {
            s.push_str(&format!("{},{:?},{:?},{:?}\n", r.iteration, r.train_mse, r.val_mse, r.lr));
        }
        s
    }
}

struct Resolved<'a> {
    xa: &'a [f64],
    xb: &'a [f64],
    target: f64,
}

fn resolve<'a>(pairs: &[DocumentPair], features: &'a FeatureMatrix) -> Result<Vec<Resolved<'a>>> {
    pairs
        .iter()
        .map(|p| {
            Ok(Resolved {
                xa: features.require(p.a_id)?,
                xb: features.require(p.b_id)?,
                target: p.relevancy,
            })
        })
        .collect()
}

fn dataset_mse(params: &SiameseParams, data: &[Resolved<'_>]) -> f64 {
    let errors: Vec<f64> = data
        .par_iter()
        .map(|r| (params.forward_unchecked(r.xa, r.xb, None).score - r.target).powi(2))
        .collect();
    errors.iter().sum::<f64>() / errors.len() as f64
}

fn diagnostic(records: &[TraceRecord], iteration: usize, what: &str) -> Error {
    let tail: Vec<String> = records
        .iter()
        .rev()
        .take(5)
        .map(|r| format!("(iter {}, train {:e}, val {:e}, lr {:e})", r.iteration, r.train_mse, r.val_mse, r.lr))
        .collect();
    Error::Numeric(format!(
        "{what} at iteration {iteration}; last evaluations: [{}]",
        tail.join(", ")
    ))
}

/// Per-pair SGD with early stopping on validation MSE.
///
/// Validation MSE (dropout off) is measured before the first update and every
/// `eval_every` updates. Training stops once `patience` consecutive
/// evaluations pass without a strict improvement (or at `max_iters`) and the
/// best-scoring snapshot is returned.
pub fn train(
    train_pairs: &PairSet,
    features: &FeatureMatrix,
    val_pairs: &PairSet,
    config: &TrainConfig,
    hidden: usize,
    combination: usize,
) -> Result<(SiameseParams, TrainTrace)> {
    config.validate()?;
    if train_pairs.is_empty() || val_pairs.is_empty() {
        return Err(Error::InvalidArgument("training needs non-empty train and validation pairs".into()));
    }
    let train_data = resolve(&train_pairs.pairs, features)?;
    let val_data = resolve(&val_pairs.pairs, features)?;
    let probe = &train_data[..config.train_probe.clamp(1, train_data.len())];

    let mut params = SiameseParams::init(features.dim(), hidden, combination, config)?;
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ STREAM_SALT);
    let mut order: Vec<usize> = (0..train_data.len()).collect();
    order.shuffle(&mut rng);

    let h = hidden;
    let mut records: Vec<TraceRecord> = Vec::new();
    let mut best = (params.clone(), 0usize, f64::INFINITY);
    let mut stale = 0usize;
    let mut stop_reason = StopReason::MaxIters;
    let mut iterations_run = 0usize;

    let mut evaluate = |params: &SiameseParams, i: usize, records: &mut Vec<TraceRecord>| -> Result<bool> {
        let val_mse = dataset_mse(params, &val_data);
        let train_mse = dataset_mse(params, probe);
        records.push(TraceRecord {
            iteration: i,
            train_mse,
            val_mse,
            lr: lrate(i, config),
        });
        if !val_mse.is_finite() || !train_mse.is_finite() {
            return Err(diagnostic(records, i, "non-finite validation loss"));
        }
        log::debug!("iter {i}: train {train_mse:.6} val {val_mse:.6}");
        if val_mse < best.2 {
            best = (params.clone(), i, val_mse);
            stale = 0;
            Ok(false)
        } else {
            stale += 1;
            Ok(stale > config.patience)
        }
    };

    for i in 0..config.max_iters {
        if i % config.eval_every == 0 && evaluate(&params, i, &mut records)? {
            stop_reason = StopReason::Patience;
            break;
        }
        let epoch_pos = i % order.len();
        if epoch_pos == 0 && i > 0 {
            order.shuffle(&mut rng);
        }
        let pair = &train_data[order[epoch_pos]];
        let masks = (config.dropout_p > 0.0).then(|| BranchMasks {
            a: DropoutMask::sample(h, config.dropout_p, &mut rng),
            b: DropoutMask::sample(h, config.dropout_p, &mut rng),
        });
        let loss = params.sgd_step(pair.xa, pair.xb, pair.target, masks.as_ref(), lrate(i, config), config.use_bias);
        iterations_run = i + 1;
        if !loss.is_finite() || !params.is_finite() {
            return Err(diagnostic(&records, i, "non-finite training loss"));
        }
    }
    if stop_reason == StopReason::MaxIters && records.last().is_none_or(|r| r.iteration != iterations_run) {
        evaluate(&params, iterations_run, &mut records)?;
    }

    let (best_params, best_iteration, best_val_mse) = best;
    Ok((
        best_params,
        TrainTrace {
            records,
            stop_reason,
            best_iteration,
            best_val_mse,
            iterations_run,
        },
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::corpus::SplitName;
    use crate::features::FeatureKind;
    use crate::pairs::{generate_pairs, PairRequest};

    fn toy() -> (FeatureMatrix, PairSet, PairSet) {
        // Two clusters in 4-D.
        let mut rows = Vec::new();
        let mut labeled = Vec::new();
        for i in 0..20 {
            let c = i % 2;
            let jitter = (i as f64) * 0.01;
            let row = if c == 0 {
                vec![1.0, 0.5 + jitter, 0.0, 0.0]
            } else {
                vec![0.0, 0.0, 1.0 - jitter, 0.5]
            };
            rows.push(row);
            labeled.push((i, format!("c{c}")));
        }
        let f = FeatureMatrix::from_rows(FeatureKind::Tfidf, (0..20).collect(), rows, 4).unwrap();
        let tr = generate_pairs(&labeled, SplitName::Train, PairRequest::new(400, 1)).unwrap();
        let va = generate_pairs(&labeled, SplitName::Validation, PairRequest::new(40, 2)).unwrap();
        (f, tr, va)
    }

    #[test]
    fn patience_zero_stops_at_first_non_improvement() {
        let (f, tr, va) = toy();
        // A vanishing learning rate cannot strictly improve the validation MSE.
        let config = TrainConfig {
            lr0: 1e-300,
            patience: 0,
            eval_every: 1,
            max_iters: 50,
            ..TrainConfig::default()
        };
        let (_, trace) = train(&tr, &f, &va, &config, 3, 3).unwrap();
        assert_eq!(trace.stop_reason, StopReason::Patience);
        assert_eq!(trace.records.len(), 2);
        assert_eq!(trace.best_iteration, 0);
    }

    #[test]
    fn training_reduces_validation_error_and_is_deterministic() {
        let (f, tr, va) = toy();
        let config = TrainConfig {
            lr0: 0.05,
            decay_horizon: 1000.0,
            init_range: 0.3,
            max_iters: 3000,
            eval_every: 100,
            patience: 100,
            seed: 4,
            ..TrainConfig::default()
        };
        let (p1, t1) = train(&tr, &f, &va, &config, 6, 4).unwrap();
        let (p2, t2) = train(&tr, &f, &va, &config, 6, 4).unwrap();
        assert_eq!(p1, p2);
        assert_eq!(t1, t2);
        assert!(t1.best_val_mse < t1.initial_val_mse());
        for w in t1.records.windows(2) {
            assert!(w[0].iteration < w[1].iteration);
        }
        assert_eq!(t1.stop_reason, StopReason::MaxIters);
        assert_eq!(t1.records.last().unwrap().iteration, 3000);
    }

    #[test]
    fn missing_feature_rows_are_rejected() {
        let (f, tr, va) = toy();
        let small = f.select(&[0, 1, 2]).unwrap();
        assert!(train(&tr, &small, &va, &TrainConfig::default(), 2, 2).is_err());
    }
}
