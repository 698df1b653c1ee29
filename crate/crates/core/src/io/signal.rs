use std::path::Path;

use super::{io_err, IoError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Encoding {
    /// Sample-interleaved little-endian int16, scaled by per-lead gain.
    Int16Interleaved,
    /// Lead after lead of little-endian float32 millivolts.
    F32ChannelMajor,
}

impl Encoding {
    pub fn element_size(self) -> u64 {
        match self {
            Self::Int16Interleaved => 2,
            Self::F32ChannelMajor => 4,
        }
    }

    /// `.dat` is int16 interleaved, `.f32` float32 channel-major.
    pub fn from_path(path: &Path) -> Result<Self, IoError> {
        match path.extension().and_then(|e| e.to_str()) {
            Some("dat") => Ok(Self::Int16Interleaved),
            Some("f32") => Ok(Self::F32ChannelMajor),
            other => Err(IoError::UnknownEncoding(other.unwrap_or("").to_string())),
        }
    }
}

impl std::str::FromStr for Encoding {
    type Err = IoError;

    fn from_str(s: &str) -> Result<Self, IoError> {
        match s {
            "int16-interleaved" | "int16" => Ok(Self::Int16Interleaved),
            "float32-channel-major" | "f32" => Ok(Self::F32ChannelMajor),
            _ => Err(IoError::UnknownEncoding(s.to_string())),
        }
    }
}

/// Read a payload into `leads x samples` millivolts. `gains` (ADC units per
/// mV) apply to int16 payloads only; missing entries default to 1000.
pub fn load_signal(
    path: &Path,
    leads: usize,
    samples: usize,
    encoding: Encoding,
    gains: &[f64],
) -> Result<Vec<Vec<f32>>, IoError> {
    let bytes = std::fs::read(path).map_err(io_err(path))?;
    let expected = (leads * samples) as u64 * encoding.element_size();
    if bytes.len() as u64 != expected {
        return Err(IoError::SizeMismatch {
            path: path.display().to_string(),
            expected,
            got: bytes.len() as u64,
        });
    }
    let mut out = vec![Vec::with_capacity(samples); leads];
    match encoding {
        Encoding::Int16Interleaved => {
            for (i, c) in bytes.chunks_exact(2).enumerate() {
                let lead = i % leads;
                let g = gains.get(lead).copied().unwrap_or(1000.0);
                let v = i16::from_le_bytes([c[0], c[1]]);
                out[lead].push((v as f64 / g) as f32);
            }
        }
        Encoding::F32ChannelMajor => {
            for (i, c) in bytes.chunks_exact(4).enumerate() {
                out[i / samples].push(f32::from_le_bytes(c.try_into().unwrap()));
            }
        }
    }
    Ok(out)
}

/// Write `leads x samples` millivolts in the given encoding. Int16 values
/// are `round(mV * gain)`, saturated to the int16 range.
pub fn write_signal(
    path: &Path,
    signal: &[Vec<f32>],
    encoding: Encoding,
    gains: &[f64],
) -> Result<(), IoError> {
    let samples = signal.first().map_or(0, |l| l.len());
    let mut bytes = Vec::with_capacity(signal.len() * samples * encoding.element_size() as usize);
    match encoding {
        Encoding::Int16Interleaved => {
            for t in 0..samples {
                for (lead, l) in signal.iter().enumerate() {
                    let g = gains.get(lead).copied().unwrap_or(1000.0);
                    let v = (l[t] as f64 * g).round().clamp(i16::MIN as f64, i16::MAX as f64);
                    bytes.extend_from_slice(&(v as i16).to_le_bytes());
                }
            }
        }
        Encoding::F32ChannelMajor => {
            for l in signal {
                for v in l {
                    bytes.extend_from_slice(&v.to_le_bytes());
                }
            }
        }
    }
    std::fs::write(path, bytes).map_err(io_err(path))
}
