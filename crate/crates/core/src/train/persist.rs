//! Model file: magic `IDCM`, a little-endian `u64` manifest length, the JSON
//! manifest, then every tensor as little-endian `f32` in manifest order.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::embed::Vocabulary;
use crate::error::{Error, Result};
use crate::nn::{ModelConfig, ModelParams, Tensor};

pub const MAGIC: &[u8; 4] = b"IDCM";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq)]
pub struct TrainedModel {
    pub config: ModelConfig,
    pub vocab: Vocabulary,
    pub params: ModelParams,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TensorEntry {
    pub name: String,
    pub shape: Vec<usize>,
    /// Byte offset into the blob.
    pub offset: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Manifest {
    pub format_version: u32,
    pub seed: u64,
    pub config: ModelConfig,
    /// Tokens for indices 2, 3, ...
    pub vocab: Vec<String>,
    pub tensors: Vec<TensorEntry>,
}

pub fn to_bytes(model: &TrainedModel) -> Result<Vec<u8>> {
    let mut tensors = Vec::new();
    let mut blob = Vec::new();
    for (name, t) in model.params.named() {
        tensors.push(TensorEntry {
            name,
            shape: t.shape().to_vec(),
            offset: blob.len(),
        });
        for &v in t.data() {
            blob.extend_from_slice(&(v as f32).to_le_bytes());
        }
    }
    let manifest = Manifest {
        format_version: FORMAT_VERSION,
        seed: model.config.seed,
        config: model.config.clone(),
        vocab: model.vocab.words().to_vec(),
        tensors,
    };
    let json = serde_json::to_vec(&manifest)?;
    let mut out = Vec::with_capacity(12 + json.len() + blob.len());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(json.len() as u64).to_le_bytes());
    out.extend_from_slice(&json);
    out.extend_from_slice(&blob);
    Ok(out)
}

fn format_err(msg: impl Into<String>) -> Error {
    Error::ModelFormat(msg.into())
}

pub fn from_bytes(bytes: &[u8]) -> Result<TrainedModel> {
    if bytes.len() < 12 || &bytes[..4] != MAGIC {
        return Err(format_err("missing IDCM header"));
    }
    let len = u64::from_le_bytes(bytes[4..12].try_into().expect("8 bytes")) as usize;
    let json = bytes
        .get(12..12usize.saturating_add(len))
        .ok_or_else(|| format_err("manifest truncated"))?;
    let manifest: Manifest =
        serde_json::from_slice(json).map_err(|e| format_err(format!("manifest: {e}")))?;
    if manifest.format_version != FORMAT_VERSION {
        return Err(format_err(format!(
            "format_version {} is not supported (expected {FORMAT_VERSION})",
            manifest.format_version
        )));
    }
    if manifest.seed != manifest.config.seed {
        return Err(format_err("seed does not match config.seed"));
    }
    let blob = &bytes[12 + len..];
    let vocab = Vocabulary::from_tokens(manifest.vocab.iter().cloned())
        .map_err(|e| format_err(format!("vocab: {e}")))?;

    let cfg = &manifest.config;
    let skeleton = Tensor::zeros(&[vocab.len(), cfg.embed_dim]);
    let mut params =
        ModelParams::init(cfg, skeleton).map_err(|e| format_err(format!("config: {e}")))?;
    let mut slots = params.named_mut();
    if slots.len() != manifest.tensors.len() {
        return Err(format_err(format!(
            "tensors: expected {} entries, found {}",
            slots.len(),
            manifest.tensors.len()
        )));
    }
    let mut expected_offset = 0usize;
    for ((name, slot), entry) in slots.iter_mut().zip(&manifest.tensors) {
        if *name != entry.name {
            return Err(format_err(format!(
                "tensors: expected `{name}`, found `{}`",
                entry.name
            )));
        }
        if slot.shape() != entry.shape.as_slice() {
            return Err(format_err(format!(
                "tensors.{name}.shape: expected {:?}, found {:?}",
                slot.shape(),
                entry.shape
            )));
        }
        if entry.offset != expected_offset {
            return Err(format_err(format!(
                "tensors.{name}.offset: expected {expected_offset}"
            )));
        }
        let end = expected_offset + slot.len() * 4;
        let raw = blob
            .get(expected_offset..end)
            .ok_or_else(|| format_err(format!("blob truncated inside `{name}`")))?;
        for (v, chunk) in slot.data_mut().iter_mut().zip(raw.chunks_exact(4)) {
            *v = f32::from_le_bytes(chunk.try_into().expect("4 bytes")) as f64;
        }
        expected_offset = end;
    }
    drop(slots);
    if blob.len() != expected_offset {
        return Err(format_err(format!(
            "blob length {} does not match manifest ({expected_offset} bytes)",
            blob.len()
        )));
    }
    Ok(TrainedModel {
        config: manifest.config,
        vocab,
        params,
    })
}

pub fn save_model(model: &TrainedModel, path: &Path) -> Result<()> {
    std::fs::write(path, to_bytes(model)?).map_err(|e| Error::io(path, e))
}

pub fn load_model(path: &Path) -> Result<TrainedModel> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    from_bytes(&bytes)
}
