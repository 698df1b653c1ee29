//! `ECGW` weights archive: named little-endian f32 tensors, the model
//! config as JSON, and a trailing CRC32 over everything before it.

use std::collections::BTreeMap;
use std::path::Path;

use thiserror::Error;

use crate::model::{ModelConfig, ModelError, ModelParams};
use crate::tensor::{Scalar, Tensor};

pub const MAGIC: &[u8; 4] = b"ECGW";
pub const VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

#[derive(Debug, Error)]
pub enum ArchiveError {
    #[error("{path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("not a weights archive (bad magic)")]
    BadMagic,
    #[error("unsupported archive version {0}")]
    UnsupportedVersion(u32),
    #[error("archive truncated")]
    Truncated,
    #[error("checksum mismatch: stored {stored:08x}, computed {computed:08x}")]
    CrcMismatch { stored: u32, computed: u32 },
    #[error("unknown dtype tag {0}")]
    UnknownDtype(u8),
    #[error("tensor {name}: dims {dims:?} do not match the payload")]
    BadDims { name: String, dims: Vec<usize> },
    #[error("embedded config: {0}")]
    Config(String),
    #[error(transparent)]
    Model(#[from] ModelError),
}

/// Serialize every tensor (trainables and batch-norm buffers) as f32.
pub fn encode<T: Scalar>(params: &ModelParams<T>) -> Vec<u8> {
    let named = params.to_named();
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(named.len() as u32).to_le_bytes());
    for (name, t) in &named {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(DTYPE_F32);
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    let config = serde_json::to_vec(params.config()).expect("config serializes");
    out.extend_from_slice(&(config.len() as u32).to_le_bytes());
    out.extend_from_slice(&config);
    let crc = crc32fast::hash(&out);
    out.extend_from_slice(&crc.to_le_bytes());
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ArchiveError> {
        let end = self.pos.checked_add(n).ok_or(ArchiveError::Truncated)?;
        let s = self.buf.get(self.pos..end).ok_or(ArchiveError::Truncated)?;
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8, ArchiveError> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16, ArchiveError> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> Result<u32, ArchiveError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

/// Decoded archive contents before they are checked against a config.
pub struct RawArchive {
    pub config: ModelConfig,
    pub tensors: BTreeMap<String, Tensor<f32>>,
}

pub fn decode_raw(bytes: &[u8]) -> Result<RawArchive, ArchiveError> {
    if bytes.len() < 4 || &bytes[..4] != MAGIC {
        return Err(ArchiveError::BadMagic);
    }
    if bytes.len() < 8 {
        return Err(ArchiveError::Truncated);
    }
    let (body, tail) = bytes.split_at(bytes.len() - 4);
    let stored = u32::from_le_bytes(tail.try_into().unwrap());
    let computed = crc32fast::hash(body);
    if stored != computed {
        return Err(ArchiveError::CrcMismatch { stored, computed });
    }
    let mut r = Reader { buf: body, pos: 4 };
    let version = r.u32()?;
    if version != VERSION {
        return Err(ArchiveError::UnsupportedVersion(version));
    }
    let count = r.u32()?;
    let mut tensors = BTreeMap::new();
    for _ in 0..count {
        let len = r.u16()? as usize;
        let name = String::from_utf8_lossy(r.take(len)?).into_owned();
        let dtype = r.u8()?;
        if dtype != DTYPE_F32 {
            return Err(ArchiveError::UnknownDtype(dtype));
        }
        let ndim = r.u8()? as usize;
        let dims = (0..ndim)
            .map(|_| r.u32().map(|d| d as usize))
            .collect::<Result<Vec<_>, _>>()?;
        let n: usize = dims.iter().product();
        let payload = r.take(n * 4)?;
        let data: Vec<f32> = payload
            .chunks_exact(4)
            .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
            .collect();
        let t = Tensor::new(data, &dims).map_err(|_| ArchiveError::BadDims {
            name: name.clone(),
            dims: dims.clone(),
        })?;
        tensors.insert(name, t);
    }
    let clen = r.u32()? as usize;
    let config: ModelConfig =
        serde_json::from_slice(r.take(clen)?).map_err(|e| ArchiveError::Config(e.to_string()))?;
    if r.pos != body.len() {
        return Err(ArchiveError::Config("trailing bytes after config".into()));
    }
    Ok(RawArchive { config, tensors })
}

/// Decode using the embedded config.
pub fn decode(bytes: &[u8]) -> Result<ModelParams<f32>, ArchiveError> {
    let raw = decode_raw(bytes)?;
    Ok(ModelParams::from_named(&raw.config, raw.tensors)?)
}

/// Decode and check the tensor names against `expected` rather than the
/// embedded config.
pub fn decode_for(bytes: &[u8], expected: &ModelConfig) -> Result<ModelParams<f32>, ArchiveError> {
    let raw = decode_raw(bytes)?;
    Ok(ModelParams::from_named(expected, raw.tensors)?)
}

fn read(path: &Path) -> Result<Vec<u8>, ArchiveError> {
    std::fs::read(path).map_err(|source| ArchiveError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn save_weights<T: Scalar>(params: &ModelParams<T>, path: &Path) -> Result<(), ArchiveError> {
    std::fs::write(path, encode(params)).map_err(|source| ArchiveError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_weights(path: &Path) -> Result<ModelParams<f32>, ArchiveError> {
    decode(&read(path)?)
}

pub fn load_weights_for(path: &Path, expected: &ModelConfig) -> Result<ModelParams<f32>, ArchiveError> {
    decode_for(&read(path)?, expected)
}
