//! Checkpoint file:
//!
//! ```text
//! "SVTM" | u32 version=1 | u32 config_len | config JSON (UTF-8)
//! every tensor in `ModelParams::tensors` order as little-endian f32
//! ```
//!
//! The file must end exactly after the last tensor.

use std::path::Path;

use super::config::MetricConfig;
use super::params::ModelParams;
use crate::error::{Error, Result};
use crate::nn::Real;

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"SVTM";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn checkpoint_bytes<T: Real>(params: &ModelParams<T>, cfg: &MetricConfig) -> Result<Vec<u8>> {
    params.check_shapes(cfg)?;
    let json = serde_json::to_vec(cfg).map_err(|e| Error::Format(e.to_string()))?;
    let mut out = Vec::with_capacity(12 + json.len() + 4 * params.param_count());
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(json.len() as u32).to_le_bytes());
    out.extend_from_slice(&json);
    for t in params.tensors() {
        for &x in t {
            out.extend_from_slice(&x.to_f32().to_le_bytes());
        }
    }
    Ok(out)
}

pub fn checkpoint_from_bytes(bytes: &[u8]) -> Result<(ModelParams<f64>, MetricConfig)> {
    if bytes.len() < 12 || &bytes[..4] != CHECKPOINT_MAGIC {
        return Err(Error::Format("bad magic, not a checkpoint".into()));
    }
    let version = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    if version != CHECKPOINT_VERSION {
        return Err(Error::Format(format!("unsupported checkpoint version {version}")));
    }
    let json_len = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes")) as usize;
    let json = bytes
        .get(12..12 + json_len)
        .ok_or_else(|| Error::Format("truncated config block".into()))?;
    let cfg: MetricConfig = serde_json::from_slice(json).map_err(|e| Error::Format(format!("config block: {e}")))?;
    cfg.validate()
        .map_err(|e| Error::Format(format!("config block: {e}")))?;

    let mut params = ModelParams::<f64>::zeros(&cfg);
    let body = &bytes[12 + json_len..];
    let expected = 4 * params.param_count();
    if body.len() != expected {
        return Err(Error::Format(format!(
            "tensor block is {} bytes, config implies {expected}",
            body.len()
        )));
    }
    let mut floats = body
        .chunks_exact(4)
        .map(|b| f64::from(f32::from_le_bytes([b[0], b[1], b[2], b[3]])));
    for t in params.tensors_mut() {
        for x in t.iter_mut() {
            *x = floats.next().expect("length checked");
        }
    }
    Ok((params, cfg))
}

pub fn save_checkpoint<T: Real>(params: &ModelParams<T>, cfg: &MetricConfig, path: impl AsRef<Path>) -> Result<()> {
    crate::io::write_atomic(path.as_ref(), &checkpoint_bytes(params, cfg)?)
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<(ModelParams<f64>, MetricConfig)> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    checkpoint_from_bytes(&bytes)
}

/// Rounds every parameter through `f32`, i.e. what a save/load cycle does.
pub fn round_to_stored(params: &ModelParams<f64>) -> ModelParams<f64> {
    params.cast::<f32>().cast::<f64>()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::params::init_params;

    fn cfg() -> MetricConfig {
        MetricConfig::desk(12, 10)
    }

    #[test]
    fn round_trip_is_exact_after_rounding() {
        let p = init_params(&cfg(), 9).unwrap();
        let bytes = checkpoint_bytes(&p, &cfg()).unwrap();
        let (back, c) = checkpoint_from_bytes(&bytes).unwrap();
        assert_eq!(c, cfg());
        assert_eq!(back, round_to_stored(&p));
        assert_eq!(checkpoint_bytes(&back, &c).unwrap(), bytes);
    }

    #[test]
    fn corrupted_magic() {
        let mut bytes = checkpoint_bytes(&init_params(&cfg(), 1).unwrap(), &cfg()).unwrap();
        bytes[1] = b'X';
        assert!(matches!(checkpoint_from_bytes(&bytes), Err(Error::Format(_))));
    }

    #[test]
    fn config_disagreeing_with_tensors() {
        let p = init_params(&cfg(), 1).unwrap();
        let bytes = checkpoint_bytes(&p, &cfg()).unwrap();
        // splice in a config with a wider text projection
        let mut other = cfg();
        other.simvec.d_text = 11;
        let json = serde_json::to_vec(&other).unwrap();
        let old_len = u32::from_le_bytes(bytes[8..12].try_into().unwrap()) as usize;
        let mut forged = b"SVTM".to_vec();
        forged.extend_from_slice(&1u32.to_le_bytes());
        forged.extend_from_slice(&(json.len() as u32).to_le_bytes());
        forged.extend_from_slice(&json);
        forged.extend_from_slice(&bytes[12 + old_len..]);
        assert!(matches!(checkpoint_from_bytes(&forged), Err(Error::Format(_))));
    }

    #[test]
    fn bad_version() {
        let mut bytes = checkpoint_bytes(&init_params(&cfg(), 1).unwrap(), &cfg()).unwrap();
        bytes[4] = 2;
        assert!(matches!(checkpoint_from_bytes(&bytes), Err(Error::Format(_))));
    }
}
