//! Checkpoint file:
//!
//! ```text
//! HEXSR-CHECKPOINT 1\n
//! <TOML header: network config, step, seed, lr, adam, loss, tensor list>\n
//! %%PARAMS%%\n
//! <f64 little-endian values, tensors in header order, each row-major>
//! ```
//!
//! Tensor order is the network's registration order: `head`, `dist.0..2`
//! (when present), then per group `body.{g}.{b}.conv1`, `.conv2`, `.ca.down`,
//! `.ca.up` for each block and `body.{g}.tail`, then `lsc`, `up.{i}`, `out`;
//! each layer contributes its weight `(out, in, k, k)` then bias `(out)`.

use std::fs;
use std::io::{BufRead, BufReader, BufWriter, Read, Write};
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::loss::LossKind;
use crate::model::{Restorer, RestorerConfig};
use crate::optim::AdamConfig;
use crate::params::{Param, ParamStore};
use crate::scalar::Scalar;

pub const CHECKPOINT_MAGIC: &str = "HEXSR-CHECKPOINT 1";
pub const PARAMS_SENTINEL: &str = "%%PARAMS%%";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub step: usize,
    pub seed: u64,
    pub lr: f64,
    pub adam: AdamConfig,
    pub loss: LossKind,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct TensorEntry {
    name: String,
    shape: Vec<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    format: String,
    meta: CheckpointMeta,
    network: RestorerConfig,
    tensors: Vec<TensorEntry>,
}

fn bad(path: &Path, reason: impl Into<String>) -> Error {
    Error::Checkpoint {
        path: path.to_path_buf(),
        reason: reason.into(),
    }
}

pub fn save_checkpoint<S: Scalar>(model: &Restorer<S>, meta: &CheckpointMeta, path: &Path) -> Result<()> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let header = Header {
        format: "f64le".into(),
        meta: meta.clone(),
        network: model.config.clone(),
        tensors: model
            .params
            .params
            .iter()
            .map(|p| TensorEntry {
                name: p.name.clone(),
                shape: p.shape.clone(),
            })
            .collect(),
    };
    let text = toml::to_string(&header).map_err(|e| bad(path, e.to_string()))?;
    let mut out = BufWriter::new(fs::File::create(path).map_err(io)?);
    writeln!(out, "{CHECKPOINT_MAGIC}").map_err(io)?;
    out.write_all(text.as_bytes()).map_err(io)?;
    if !text.ends_with('\n') {
        writeln!(out).map_err(io)?;
    }
    writeln!(out, "{PARAMS_SENTINEL}").map_err(io)?;
    for p in &model.params.params {
        for v in p.data.iter() {
            out.write_all(&v.f64().to_le_bytes()).map_err(io)?;
        }
    }
    out.flush().map_err(io)
}

pub fn load_checkpoint<S: Scalar>(path: &Path) -> Result<(Restorer<S>, CheckpointMeta)> {
    let io = |e| Error::Io {
        path: path.to_path_buf(),
        source: e,
    };
    let mut reader = BufReader::new(fs::File::open(path).map_err(io)?);
    let mut line = String::new();
    reader.read_line(&mut line).map_err(io)?;
    if line.trim_end() != CHECKPOINT_MAGIC {
        return Err(bad(path, "missing checkpoint magic"));
    }
    let mut text = String::new();
    loop {
        line.clear();
        if reader.read_line(&mut line).map_err(io)? == 0 {
            return Err(bad(path, "header not terminated"));
        }
        if line.trim_end() == PARAMS_SENTINEL {
            break;
        }
        text.push_str(&line);
    }
    let header: Header = toml::from_str(&text).map_err(|e| bad(path, e.to_string()))?;
    if header.format != "f64le" {
        return Err(bad(path, format!("unsupported format {}", header.format)));
    }
    let mut bytes = Vec::new();
    reader.read_to_end(&mut bytes).map_err(io)?;
    let count: usize = header.tensors.iter().map(|t| t.shape.iter().product::<usize>()).sum();
    if bytes.len() != 8 * count {
        return Err(bad(path, format!("expected {} parameter bytes, found {}", 8 * count, bytes.len())));
    }
    let mut values = bytes
        .chunks_exact(8)
        .map(|b| f64::from_le_bytes(b.try_into().expect("8-byte chunk")));
    let params = ParamStore {
        params: header
            .tensors
            .into_iter()
            .map(|t| {
                let n = t.shape.iter().product();
                Param {
                    name: t.name,
                    shape: t.shape,
                    data: Array1::from_iter(values.by_ref().take(n).map(S::of)),
                }
            })
            .collect(),
    };
    if params.params.iter().flat_map(|p| p.data.iter()).any(|v| !v.is_finite()) {
        return Err(bad(path, "non-finite parameter"));
    }
    let model = Restorer::from_params(header.network, params)?;
    Ok((model, header.meta))
}
