//! Exact t-SNE projection to 2-D and labelled scatter export.

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::corpus::DocId;
use crate::error::{Error, Result};
use crate::linalg::Matrix;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TsneConfig {
    pub perplexity: f64,
    pub iters: usize,
    pub learning_rate: f64,
    pub momentum_early: f64,
    pub momentum_late: f64,
    pub momentum_switch: usize,
    pub exaggeration: f64,
    pub exaggeration_iters: usize,
    pub min_gain: f64,
    pub seed: u64,
}

impl Default for TsneConfig {
    fn default() -> Self {
        Self {
            perplexity: 30.0,
            iters: 1000,
            learning_rate: 200.0,
            momentum_early: 0.5,
            momentum_late: 0.8,
            momentum_switch: 250,
            exaggeration: 12.0,
            exaggeration_iters: 250,
            min_gain: 0.01,
            seed: 0,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TsneResult {
    /// `n × 2`.
    pub coords: Matrix,
    /// KL(P‖Q) with the unexaggerated P, before the first update and after each one.
    pub kl_history: Vec<f64>,
}

fn squared_distances(x: &Matrix) -> Matrix {
    let n = x.rows();
    let rows: Vec<Vec<f64>> = (0..n)
        .into_par_iter()
        .map(|i| {
            (0..n)
                .map(|j| {
                    x.row(i)
                        .iter()
                        .zip(x.row(j))
                        .map(|(a, b)| (a - b) * (a - b))
                        .sum()
                })
                .collect()
        })
        .collect();
    Matrix::from_vec(n, n, rows.concat())
}

/// Row-conditional Gaussian affinities `p(j|i)` whose bandwidths are found
/// by bisection so each row's perplexity matches the target.
///
/// Returns the matrix and the perplexity actually reached per row.
pub fn conditional_probabilities(x: &Matrix, perplexity: f64) -> Result<(Matrix, Vec<f64>)> {
    let n = x.rows();
    let d = squared_distances(x);
    if d.as_slice().iter().all(|&v| v == 0.0) {
        return Err(Error::InvalidArgument("t-SNE input points are all identical".into()));
    }
    let target = perplexity.ln();
    let rows: Vec<(Vec<f64>, f64)> = (0..n)
        .into_par_iter()
        .map(|i| {
            let dist: Vec<f64> = (0..n).filter(|&j| j != i).map(|j| d.get(i, j)).collect();
            let dmin = dist.iter().copied().fold(f64::INFINITY, f64::min);
            let mut beta = 1.0;
            let (mut lo, mut hi) = (0.0f64, f64::INFINITY);
            let mut p = vec![0.0; dist.len()];
            let mut entropy = 0.0;
            for _ in 0..200 {
                let mut sum = 0.0;
                let mut weighted = 0.0;
                for (pj, &dj) in p.iter_mut().zip(&dist) {
                    let shifted = dj - dmin;
                    *pj = (-beta * shifted).exp();
                    sum += *pj;
                    weighted += *pj * shifted;
                }
                entropy = sum.ln() + beta * weighted / sum;
                p.iter_mut().for_each(|v| *v /= sum);
                let diff = entropy - target;
                if diff.abs() < 1e-10 {
                    break;
                }
                if diff > 0.0 {
                    lo = beta;
                    beta = if hi.is_finite() { 0.5 * (beta + hi) } else { beta * 2.0 };
                } else {
                    hi = beta;
                    beta = 0.5 * (beta + lo);
                }
            }
            let mut row = Vec::with_capacity(n);
            let mut it = p.into_iter();
            for j in 0..n {
                row.push(if j == i { 0.0 } else { it.next().expect("n-1 entries") });
            }
            (row, entropy.exp())
        })
        .collect();
    let mut out = Matrix::zeros(n, n);
    let mut reached = Vec::with_capacity(n);
    for (i, (row, perp)) in rows.into_iter().enumerate() {
        out.row_mut(i).copy_from_slice(&row);
        reached.push(perp);
    }
    Ok((out, reached))
}

/// Symmetrised joint affinities `(p(j|i) + p(i|j)) / 2n`.
pub fn joint_probabilities(x: &Matrix, perplexity: f64) -> Result<Matrix> {
    let (cond, _) = conditional_probabilities(x, perplexity)?;
    let n = cond.rows();
    let denom = 2.0 * n as f64;
    Ok(Matrix::from_fn(n, n, |i, j| (cond.get(i, j) + cond.get(j, i)) / denom))
}

/// Student-t affinities of the embedding: unnormalised numerators and their sum.
fn student_t(y: &Matrix) -> (Matrix, f64) {
    let n = y.rows();
    let num = Matrix::from_fn(n, n, |i, j| {
        if i == j {
            0.0
        } else {
            let dx = y.get(i, 0) - y.get(j, 0);
            let dy = y.get(i, 1) - y.get(j, 1);
            1.0 / (1.0 + dx * dx + dy * dy)
        }
    });
    let sum = num.as_slice().iter().sum();
    (num, sum)
}

pub fn kl_divergence(p: &Matrix, y: &Matrix) -> f64 {
    let (num, sum) = student_t(y);
    p.as_slice()
        .iter()
        .zip(num.as_slice())
        .filter(|(&pij, _)| pij > 0.0)
        .map(|(&pij, &nij)| pij * (pij / (nij / sum).max(f64::MIN_POSITIVE)).ln())
        .sum()
}

/// Exact O(n²) t-SNE with momentum, gains and early exaggeration.
pub fn tsne(x: &Matrix, config: &TsneConfig) -> Result<TsneResult> {
    let n = x.rows();
    if n < 4 {
        return Err(Error::InvalidArgument(format!("t-SNE needs at least 4 points, got {n}")));
    }
    if !(config.perplexity > 0.0 && config.perplexity < (n as f64 - 1.0) / 3.0) {
        return Err(Error::InvalidArgument(format!(
            "perplexity {} must lie in (0, {}) for {n} points",
            config.perplexity,
            (n as f64 - 1.0) / 3.0
        )));
    }
    if config.iters == 0 {
        return Err(Error::InvalidArgument("t-SNE needs at least one iteration".into()));
    }
    let p = joint_probabilities(x, config.perplexity)?;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let normal = Normal::new(0.0, 1e-4).expect("valid normal");
    let mut y = Matrix::from_fn(n, 2, |_, _| normal.sample(&mut rng));
    let mut velocity = Matrix::zeros(n, 2);
    let mut gains = Matrix::from_fn(n, 2, |_, _| 1.0);
    let mut kl_history = Vec::with_capacity(config.iters + 1);
    kl_history.push(kl_divergence(&p, &y));

    for iter in 0..config.iters {
        let exaggeration = if iter < config.exaggeration_iters { config.exaggeration } else { 1.0 };
        let momentum = if iter < config.momentum_switch { config.momentum_early } else { config.momentum_late };
        let (num, sum) = student_t(&y);
        let grad: Vec<[f64; 2]> = (0..n)
            .into_par_iter()
            .map(|i| {
                let mut g = [0.0; 2];
                for j in 0..n {
                    if i == j {
                        continue;
                    }
                    let nij = num.get(i, j);
                    let mult = (exaggeration * p.get(i, j) - nij / sum) * nij;
                    g[0] += mult * (y.get(i, 0) - y.get(j, 0));
                    g[1] += mult * (y.get(i, 1) - y.get(j, 1));
                }
                [4.0 * g[0], 4.0 * g[1]]
            })
            .collect();
        for (i, g) in grad.iter().enumerate() {
            for d in 0..2 {
                let gain = gains.get(i, d);
                let v = velocity.get(i, d);
                let gain = if (g[d] > 0.0) != (v > 0.0) { gain + 0.2 } else { gain * 0.8 };
                let gain = gain.max(config.min_gain);
                gains.set(i, d, gain);
                let v = momentum * v - config.learning_rate * gain * g[d];
                velocity.set(i, d, v);
                y.set(i, d, y.get(i, d) + v);
            }
        }
        for d in 0..2 {
            let mean = (0..n).map(|i| y.get(i, d)).sum::<f64>() / n as f64;
            for i in 0..n {
                y.set(i, d, y.get(i, d) - mean);
            }
        }
        if !y.is_finite() {
            return Err(Error::Numeric(format!("t-SNE diverged at iteration {iter}")));
        }
        kl_history.push(kl_divergence(&p, &y));
    }
    Ok(TsneResult { coords: y, kl_history })
}

const PALETTE: [&str; 10] = [
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd", "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
];

fn xml_escape(s: &str) -> String {
    s.replace('&', "&amp;").replace('<', "&lt;").replace('>', "&gt;").replace('"', "&quot;")
}

/// Write `doc_id,x,y,label` CSV and an SVG scatter with one colour per
/// class (assigned in lexicographic label order) and a legend.
pub fn export_scatter(coords: &Matrix, doc_ids: &[DocId], labels: &[String], csv_path: &Path, svg_path: &Path) -> Result<()> {
    let n = coords.rows();
    if labels.len() != n || doc_ids.len() != n || coords.cols() != 2 {
        return Err(Error::Dimension {
            expected: n,
            got: labels.len(),
        });
    }
    let classes: Vec<&str> = labels.iter().map(String::as_str).collect::<BTreeSet<_>>().into_iter().collect();
    let color = |l: &str| PALETTE[classes.binary_search(&l).expect("known label") % PALETTE.len()];

    let mut csv = String::from("doc_id,x,y,label\n");
    for i in 0..n {
        let label = if labels[i].contains([',', '"', '\n']) {
            format!("\"{}\"", labels[i].replace('"', "\"\""))
        } else {
            labels[i].clone()
        };
        let _ = writeln!(csv, "{},{:?},{:?},{}", doc_ids[i], coords.get(i, 0), coords.get(i, 1), label);
    }
    fs::write(csv_path, csv).map_err(|e| Error::io(csv_path, e))?;

    let (width, height, margin, legend_w) = (800.0, 600.0, 30.0, 160.0);
    let xs = (0..n).map(|i| coords.get(i, 0));
    let ys = (0..n).map(|i| coords.get(i, 1));
    let (xmin, xmax) = xs.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let (ymin, ymax) = ys.fold((f64::INFINITY, f64::NEG_INFINITY), |(a, b), v| (a.min(v), b.max(v)));
    let sx = (width - legend_w - 2.0 * margin) / (xmax - xmin).max(1e-12);
    let sy = (height - 2.0 * margin) / (ymax - ymin).max(1e-12);

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{width}" height="{height}" viewBox="0 0 {width} {height}">"#
    );
    let _ = writeln!(svg, r#"<rect width="100%" height="100%" fill="white"/>"#);
    for i in 0..n {
        let px = margin + (coords.get(i, 0) - xmin) * sx;
        let py = height - margin - (coords.get(i, 1) - ymin) * sy;
        let _ = writeln!(
            svg,
            r#"<circle cx="{px:.2}" cy="{py:.2}" r="3" fill="{}" fill-opacity="0.8"/>"#,
            color(&labels[i])
        );
    }
    let _ = writeln!(svg, r#"<g class="legend" font-family="sans-serif" font-size="13">"#);
    for (k, class) in classes.iter().enumerate() {
        let lx = width - legend_w + 10.0;
        let ly = margin + 20.0 * k as f64;
        let _ = writeln!(
            svg,
            r#"<g class="legend-entry"><rect x="{lx:.0}" y="{:.0}" width="12" height="12" fill="{}"/><text x="{:.0}" y="{:.0}">{}</text></g>"#,
            ly - 10.0,
            color(class),
            lx + 18.0,
            ly,
            xml_escape(class)
        );
    }
    svg.push_str("</g>\n</svg>\n");
    fs::write(svg_path, svg).map_err(|e| Error::io(svg_path, e))
}
