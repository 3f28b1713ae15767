//! Model file layout:
//!
//! ```text
//! DOCSIAM-MODEL 1\n
//! <header: one line of JSON>\n
//! <payload: little-endian f64 values>
//! ```
//!
//! Payload order: W1 (H×D, row-major), b1 (H), W21 (C×2H, row-major),
//! b21 (C), W22 (C), b22 (1).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{Activation, SiameseParams, TrainConfig};
use crate::error::{Error, Result};
use crate::linalg::Matrix;

const MAGIC: &str = "DOCSIAM-MODEL 1";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelHeader {
    pub input_dim: usize,
    pub hidden_dim: usize,
    pub combination_dim: usize,
    pub subnet_activation: Activation,
    pub combination_activation: String,
    pub output_activation: String,
    pub epsilon: f64,
    pub n_values: usize,
    pub seed: u64,
    pub train_config: TrainConfig,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub extra: Option<serde_json::Value>,
}

fn value_count(d: usize, h: usize, c: usize) -> usize {
    h * d + h + c * 2 * h + c + c + 1
}

pub fn write_model(path: &Path, params: &SiameseParams, config: &TrainConfig, extra: Option<serde_json::Value>) -> Result<()> {
    let (d, h, c) = (params.input_dim(), params.hidden_dim(), params.combination_dim());
    let header = ModelHeader {
        input_dim: d,
        hidden_dim: h,
        combination_dim: c,
        subnet_activation: params.subnet_activation,
        combination_activation: "leaky_relu".into(),
        output_activation: "tanh".into(),
        epsilon: params.epsilon,
        n_values: value_count(d, h, c),
        seed: config.seed,
        train_config: config.clone(),
        extra,
    };
    let json = serde_json::to_string(&header).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let mut bytes = Vec::with_capacity(MAGIC.len() + json.len() + 2 + header.n_values * 8);
    bytes.extend_from_slice(MAGIC.as_bytes());
    bytes.push(b'\n');
    bytes.extend_from_slice(json.as_bytes());
    bytes.push(b'\n');
    let values = params
        .w1
        .as_slice()
        .iter()
        .chain(&params.b1)
        .chain(params.w21.as_slice())
        .chain(&params.b21)
        .chain(&params.w22)
        .chain(std::iter::once(&params.b22));
    for v in values {
        bytes.extend_from_slice(&v.to_le_bytes());
    }
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn read_model(path: &Path) -> Result<(SiameseParams, ModelHeader)> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    let mut lines = bytes.splitn(3, |&b| b == b'\n');
    let magic = lines.next().unwrap_or_default();
    if magic != MAGIC.as_bytes() {
        return Err(Error::format(path, 1, "not a docsiam model file"));
    }
    let header_line = lines
        .next()
        .ok_or_else(|| Error::format(path, 2, "missing header"))?;
    let header: ModelHeader = serde_json::from_slice(header_line).map_err(|e| Error::Json {
        path: path.to_path_buf(),
        source: e,
    })?;
    let payload = lines.next().unwrap_or_default();
    let (d, h, c) = (header.input_dim, header.hidden_dim, header.combination_dim);
    let n = value_count(d, h, c);
    if header.n_values != n || payload.len() != n * 8 {
        return Err(Error::format(
            path,
            3,
            format!("payload holds {} bytes, expected {}", payload.len(), n * 8),
        ));
    }
    let mut values = payload
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
    let mut take = |k: usize| -> Vec<f64> { values.by_ref().take(k).collect() };
    let w1 = Matrix::from_vec(h, d, take(h * d));
    let b1 = take(h);
    let w21 = Matrix::from_vec(c, 2 * h, take(c * 2 * h));
    let b21 = take(c);
    let w22 = take(c);
    let b22 = take(1)[0];
    let params = SiameseParams {
        w1,
        b1,
        w21,
        b21,
        w22,
        b22,
        epsilon: header.epsilon,
        subnet_activation: header.subnet_activation,
    };
    Ok((params, header))
}
