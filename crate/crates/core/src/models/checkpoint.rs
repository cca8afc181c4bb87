//! Binary checkpoints, little-endian throughout:
//! `"GDRP"`, version `u32`, size count `u32`, sizes `u32…`, activation tag
//! `u32` (0 sigmoid, 1 relu), then the flat parameters as `f64` in layer
//! order (each layer's row-major weights, then its biases).

use std::fs;
use std::path::Path;

use super::{Activation, Architecture, MlpModel};
use crate::error::{Error, Result};

const MAGIC: &[u8; 4] = b"GDRP";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn to_bytes(model: &MlpModel) -> Vec<u8> {
    let sizes = model.arch().sizes();
    let mut out = Vec::with_capacity(16 + 4 * sizes.len() + 8 * model.param_count());
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(sizes.len() as u32).to_le_bytes());
    for &s in sizes {
        out.extend_from_slice(&(s as u32).to_le_bytes());
    }
    out.extend_from_slice(&model.arch().activation().tag().to_le_bytes());
    for &p in model.params() {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

pub fn from_bytes(bytes: &[u8], path: &Path) -> Result<MlpModel> {
    let bad = |msg: String| Error::Format {
        path: path.to_path_buf(),
        msg,
    };
    let mut pos = 0;
    let mut u32_at = |what: &str| -> Result<u32> {
        let b = bytes
            .get(pos..pos + 4)
            .ok_or_else(|| bad(format!("truncated checkpoint while reading {what}")))?;
        pos += 4;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]))
    };
    if bytes.get(..4) != Some(MAGIC.as_slice()) {
        return Err(bad("missing GDRP magic".into()));
    }
    u32_at("magic")?;
    let version = u32_at("version")?;
    if version != CHECKPOINT_VERSION {
        return Err(bad(format!("unsupported checkpoint version {version}")));
    }
    let count = u32_at("layer count")? as usize;
    if !(2..=64).contains(&count) {
        return Err(bad(format!("implausible layer count {count}")));
    }
    let sizes = (0..count).map(|_| u32_at("sizes").map(|s| s as usize)).collect::<Result<Vec<_>>>()?;
    let tag = u32_at("activation")?;
    let activation = Activation::from_tag(tag).ok_or_else(|| bad(format!("unknown activation tag {tag}")))?;
    let arch = Architecture::new(sizes, activation).map_err(|e| bad(e.to_string()))?;
    let body = &bytes[pos..];
    if body.len() != 8 * arch.param_count() {
        return Err(bad(format!(
            "expected {} parameter bytes, found {}",
            8 * arch.param_count(),
            body.len()
        )));
    }
    let params = body
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
        .collect();
    MlpModel::from_params(arch, params)
}

pub fn save_checkpoint(model: &MlpModel, path: &Path) -> Result<()> {
    fs::write(path, to_bytes(model))?;
    Ok(())
}

pub fn load_checkpoint(path: &Path) -> Result<MlpModel> {
    from_bytes(&fs::read(path)?, path)
}
