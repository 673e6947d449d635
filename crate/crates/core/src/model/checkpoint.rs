//! Checkpoint container:
//!
//! ```text
//! b"ACKP" | u32 LE header length | JSON header
//! then per section: u32 LE name length | name | ACT1 tensor (f64 payload)
//! ```

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array1;
use serde::{Deserialize, Serialize};

use super::config::ModelConfig;
use super::params::{Captioner, ModelParams};
use crate::error::{Error, Result};
use crate::nn::{ParamSet, RunningStats};
use crate::tensor_io::{self, Tensor, VERSION_F64};

const MAGIC: [u8; 4] = *b"ACKP";
const RUNNING_MEAN: &str = "bn.running_mean";
const RUNNING_VAR: &str = "bn.running_var";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub epoch: usize,
    pub validation_loss: Option<f64>,
    pub vocab_hash: String,
    pub event_vocab_hash: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    config: ModelConfig,
    #[serde(flatten)]
    meta: CheckpointMeta,
    sections: Vec<String>,
}

fn ckpt_err(msg: impl Into<String>) -> Error {
    Error::Checkpoint(msg.into())
}

pub fn write_checkpoint(out: &mut impl Write, model: &Captioner, meta: &CheckpointMeta) -> Result<()> {
    let p = &model.params;
    let mut sections: Vec<(String, Tensor)> = p
        .names()
        .into_iter()
        .zip(p.slices())
        .zip(p.shapes())
        .map(|((n, s), dims)| Ok((n, Tensor::new(dims, s.to_vec())?)))
        .collect::<Result<_>>()?;
    sections.push((RUNNING_MEAN.into(), Tensor::vector(model.bn_stats.mean.to_vec())));
    sections.push((RUNNING_VAR.into(), Tensor::vector(model.bn_stats.var.to_vec())));
    let header = Header {
        config: model.config.clone(),
        meta: meta.clone(),
        sections: sections.iter().map(|(n, _)| n.clone()).collect(),
    };
    let json = serde_json::to_vec(&header)?;
    let io = |e| ckpt_err(format!("write failed: {e}"));
    out.write_all(&MAGIC).map_err(io)?;
    out.write_all(&(json.len() as u32).to_le_bytes()).map_err(io)?;
    out.write_all(&json).map_err(io)?;
    for (name, t) in &sections {
        out.write_all(&(name.len() as u32).to_le_bytes()).map_err(io)?;
        out.write_all(name.as_bytes()).map_err(io)?;
        tensor_io::encode(t, VERSION_F64, out).map_err(io)?;
    }
    Ok(())
}

fn read_u32(input: &mut impl Read) -> Result<u32> {
    let mut b = [0u8; 4];
    input.read_exact(&mut b).map_err(|e| ckpt_err(format!("truncated: {e}")))?;
    Ok(u32::from_le_bytes(b))
}

fn read_string(input: &mut impl Read, len: usize) -> Result<Vec<u8>> {
    let mut b = vec![0u8; len];
    input.read_exact(&mut b).map_err(|e| ckpt_err(format!("truncated: {e}")))?;
    Ok(b)
}

pub fn read_checkpoint(input: &mut impl Read) -> Result<(Captioner, CheckpointMeta)> {
    let magic = read_string(input, 4)?;
    if magic != MAGIC {
        return Err(ckpt_err("bad magic"));
    }
    let len = read_u32(input)? as usize;
    let header: Header = serde_json::from_slice(&read_string(input, len)?)?;
    header.config.validate()?;

    let mut params = ModelParams::zeros(&header.config);
    let names = params.names();
    let shapes = params.shapes();
    let mut expected: Vec<String> = names.clone();
    expected.push(RUNNING_MEAN.into());
    expected.push(RUNNING_VAR.into());
    if header.sections != expected {
        return Err(ckpt_err("section list does not match the configured architecture"));
    }
    let mut stats = RunningStats::new(params.bn.dim());
    for (i, name) in expected.iter().enumerate() {
        let nlen = read_u32(input)? as usize;
        let got = read_string(input, nlen)?;
        if got != name.as_bytes() {
            return Err(ckpt_err(format!("expected section {name:?}, found {:?}", String::from_utf8_lossy(&got))));
        }
        let t = tensor_io::decode(input)?;
        if i < names.len() {
            if t.dims != shapes[i] {
                return Err(ckpt_err(format!("section {name}: shape {:?}, expected {:?}", t.dims, shapes[i])));
            }
            params.slices_mut()[i].copy_from_slice(&t.data);
        } else {
            if t.dims != [stats.mean.len()] {
                return Err(ckpt_err(format!("section {name}: shape {:?}", t.dims)));
            }
            let v = Array1::from(t.data);
            if name == RUNNING_MEAN {
                stats.mean = v;
            } else {
                stats.var = v;
            }
        }
    }
    let mut rest = Vec::new();
    input.read_to_end(&mut rest).map_err(|e| ckpt_err(e.to_string()))?;
    if !rest.is_empty() {
        return Err(ckpt_err(format!("{} trailing bytes", rest.len())));
    }
    Ok((Captioner { config: header.config, params, bn_stats: stats }, header.meta))
}

pub fn save_checkpoint(path: &Path, model: &Captioner, meta: &CheckpointMeta) -> Result<()> {
    let mut buf = Vec::new();
    write_checkpoint(&mut buf, model, meta)?;
    std::fs::write(path, buf).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint(path: &Path) -> Result<(Captioner, CheckpointMeta)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    read_checkpoint(&mut bytes.as_slice())
}

/// Guards against pairing a checkpoint with a different vocabulary.
pub fn check_vocab_hash(meta: &CheckpointMeta, hash: &str) -> Result<()> {
    if meta.vocab_hash != hash {
        return Err(ckpt_err(format!("vocabulary hash {} does not match checkpoint {}", hash, meta.vocab_hash)));
    }
    Ok(())
}
