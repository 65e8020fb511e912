//! Versioned binary model blob.
//!
//! Layout, little-endian: magic `GDRKNET\0`, `u32` format version, `u64`
//! config length, the training config as JSON, `u64` parameter count, then
//! the parameters as `f64`.

use std::path::Path;

use gdrkit_core::model::{TinyNet, TrainConfig};

pub const MAGIC: [u8; 8] = *b"GDRKNET\0";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum ModelFileError {
    #[error("not a gdrkit model file")]
    BadMagic,
    #[error("model format version {0} is not supported (expected {FORMAT_VERSION})")]
    UnsupportedVersion(u32),
    #[error("model file truncated")]
    Truncated,
    #[error("embedded config unreadable: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] gdrkit_core::Error),
    #[error("cannot access {path}: {reason}")]
    Io { path: String, reason: String },
}

#[derive(Debug, Clone, PartialEq)]
pub struct SavedModel {
    pub config: TrainConfig,
    pub net: TinyNet,
}

pub fn encode(config: &TrainConfig, net: &TinyNet) -> Vec<u8> {
    let cfg = serde_json::to_vec(config).expect("config serializes");
    let params = net.params();
    let mut out = Vec::with_capacity(28 + cfg.len() + 8 * params.len());
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    out.extend_from_slice(&(cfg.len() as u64).to_le_bytes());
    out.extend_from_slice(&cfg);
    out.extend_from_slice(&(params.len() as u64).to_le_bytes());
    for p in params {
        out.extend_from_slice(&p.to_le_bytes());
    }
    out
}

struct Reader<'a>(&'a [u8]);

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelFileError> {
        if self.0.len() < n {
            return Err(ModelFileError::Truncated);
        }
        let (head, rest) = self.0.split_at(n);
        self.0 = rest;
        Ok(head)
    }

    fn u64(&mut self) -> Result<u64, ModelFileError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }
}

pub fn decode(bytes: &[u8]) -> Result<SavedModel, ModelFileError> {
    let mut r = Reader(bytes);
    if r.take(8).map_err(|_| ModelFileError::BadMagic)? != MAGIC {
        return Err(ModelFileError::BadMagic);
    }
    let version = u32::from_le_bytes(r.take(4)?.try_into().expect("4 bytes"));
    if version != FORMAT_VERSION {
        return Err(ModelFileError::UnsupportedVersion(version));
    }
    let cfg_len = usize::try_from(r.u64()?).map_err(|_| ModelFileError::Truncated)?;
    let config: TrainConfig =
        serde_json::from_slice(r.take(cfg_len)?).map_err(|e| ModelFileError::Config(e.to_string()))?;
    let n = usize::try_from(r.u64()?).map_err(|_| ModelFileError::Truncated)?;
    let raw = r.take(n.checked_mul(8).ok_or(ModelFileError::Truncated)?)?;
    let params = raw
        .chunks_exact(8)
        .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
        .collect();
    let net = TinyNet::from_params(config.net, params)?;
    Ok(SavedModel { config, net })
}

pub fn save_model(path: &Path, config: &TrainConfig, net: &TinyNet) -> Result<(), ModelFileError> {
    std::fs::write(path, encode(config, net)).map_err(|e| ModelFileError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })
}

pub fn load_model(path: &Path) -> Result<SavedModel, ModelFileError> {
    let bytes = std::fs::read(path).map_err(|e| ModelFileError::Io {
        path: path.display().to_string(),
        reason: e.to_string(),
    })?;
    decode(&bytes)
}
