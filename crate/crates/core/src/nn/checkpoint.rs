//! Weight checkpoints: a JSON header followed by raw little-endian `f32`
//! parameter data.
//!
//! Layout: the 8-byte magic `NNCKPT01`, a `u64` LE header length, the UTF-8
//! JSON header, then every parameter tensor's values in declaration order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::layers::LayerSpec;
use super::tensor::Tensor;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"NNCKPT01";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CheckpointHeader {
    pub format_version: u32,
    pub layers: Vec<LayerSpec>,
    pub shapes: Vec<Vec<usize>>,
    pub seed: u64,
    pub epoch: usize,
    /// Free-form model configuration.
    #[serde(default)]
    pub config: serde_json::Value,
}

pub fn encode(header: &CheckpointHeader, params: &[&Tensor<f32>]) -> Result<Vec<u8>> {
    if header.shapes.len() != params.len() || header.shapes.iter().zip(params).any(|(s, p)| s.as_slice() != p.shape()) {
        return Err(Error::Shape("checkpoint header shapes do not match parameters".into()));
    }
    let json = serde_json::to_vec(header)?;
    let mut out = Vec::with_capacity(16 + json.len() + 4 * params.iter().map(|p| p.len()).sum::<usize>());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    for p in params {
        for v in p.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

pub fn decode(bytes: &[u8]) -> Result<(CheckpointHeader, Vec<Tensor<f32>>)> {
    if bytes.len() < 16 || &bytes[..8] != MAGIC {
        return Err(Error::Format("not a weight checkpoint (bad magic)".into()));
    }
    let hlen = u64::from_le_bytes(bytes[8..16].try_into().expect("8 bytes")) as usize;
    let body = bytes
        .get(16..16 + hlen)
        .ok_or_else(|| Error::Format("checkpoint header truncated".into()))?;
    let header: CheckpointHeader = serde_json::from_slice(body)?;
    if header.format_version != FORMAT_VERSION {
        return Err(Error::Format(format!(
            "checkpoint format version {} (expected {FORMAT_VERSION})",
            header.format_version
        )));
    }
    let mut pos = 16 + hlen;
    let mut params = Vec::with_capacity(header.shapes.len());
    for shape in &header.shapes {
        let n: usize = shape.iter().product();
        let raw = bytes
            .get(pos..pos + 4 * n)
            .ok_or_else(|| Error::Format("checkpoint parameter data truncated".into()))?;
        let data = raw
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes([c[0], c[1], c[2], c[3]]))
            .collect();
        params.push(Tensor::new(shape.clone(), data)?);
        pos += 4 * n;
    }
    if pos != bytes.len() {
        return Err(Error::Format(format!(
            "{} trailing bytes after checkpoint data",
            bytes.len() - pos
        )));
    }
    Ok((header, params))
}

pub fn save(path: &Path, header: &CheckpointHeader, params: &[&Tensor<f32>]) -> Result<()> {
    let bytes = encode(header, params)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}

pub fn load(path: &Path) -> Result<(CheckpointHeader, Vec<Tensor<f32>>)> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes)
}
