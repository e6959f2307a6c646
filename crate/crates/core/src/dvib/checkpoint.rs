//! Binary model checkpoints (layout in `docs/checkpoint-format.md`).

use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use super::model::{DvibArch, DvibModel, ParamLayout};
use super::train::TrainConfig;
use crate::error::{DibError, Result};

pub const CHECKPOINT_MAGIC: &[u8; 8] = b"DIBCKPT\0";
pub const CHECKPOINT_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
struct Header {
    arch: DvibArch,
    layout: ParamLayout,
    config: TrainConfig,
    num_params: usize,
}

pub fn encode_checkpoint(model: &DvibModel, config: &TrainConfig) -> Result<Vec<u8>> {
    let header = serde_json::to_vec(&Header {
        arch: model.arch().clone(),
        layout: model.layout().clone(),
        config: config.clone(),
        num_params: model.params().len(),
    })?;
    let mut out = Vec::with_capacity(20 + header.len() + 8 * model.params().len() + 32);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(header.len() as u64).to_le_bytes());
    out.extend_from_slice(&header);
    for p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    let digest = Sha256::digest(&out);
    out.extend_from_slice(&digest);
    Ok(out)
}

pub fn decode_checkpoint(bytes: &[u8], path: &Path) -> Result<(DvibModel, TrainConfig)> {
    let bad = |r: String| DibError::format(path, r);
    if bytes.len() < 20 + 32 {
        return Err(bad(format!("{} bytes is too short for a checkpoint", bytes.len())));
    }
    if &bytes[..8] != CHECKPOINT_MAGIC {
        return Err(bad("not a checkpoint (bad magic)".into()));
    }
    let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let (body, trailer) = bytes.split_at(bytes.len() - 32);
    let found = Sha256::digest(body);
    if found.as_slice() != trailer {
        return Err(DibError::Checksum {
            path: path.display().to_string(),
            expected: hex(trailer),
            found: hex(&found),
        });
    }
    let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
    let header_end = 20usize
        .checked_add(header_len)
        .filter(|&e| e <= body.len())
        .ok_or_else(|| bad("header length exceeds file".into()))?;
    let header: Header = serde_json::from_slice(&body[20..header_end]).map_err(|e| bad(format!("header: {e}")))?;
    let payload = &body[header_end..];
    if payload.len() != 8 * header.num_params {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            8 * header.num_params,
            payload.len()
        )));
    }
    let params = payload
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let model = DvibModel::from_params(header.arch, params)?;
    if model.layout() != &header.layout {
        return Err(bad("layout map does not match the architecture".into()));
    }
    Ok((model, header.config))
}

pub fn save_checkpoint(model: &DvibModel, config: &TrainConfig, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    fs::write(path, encode_checkpoint(model, config)?).map_err(|e| DibError::io(path, e))
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(DvibModel, TrainConfig)> {
    let path = path.as_ref();
    let bytes = fs::read(path).map_err(|e| DibError::io(path, e))?;
    decode_checkpoint(&bytes, path)
}

fn hex(bytes: &[u8]) -> String {
    bytes.iter().map(|b| format!("{b:02x}")).collect()
}
