use std::path::Path;

use super::{io_err, IoError};

pub const CACHE_MAGIC: &[u8; 4] = b"ECGS";
const CACHE_VERSION: u32 = 1;

/// Write a preprocessed `leads x samples` signal.
pub fn write_cache(path: &Path, signal: &[Vec<f32>], fs: u32) -> Result<(), IoError> {
    let samples = signal.first().map_or(0, |l| l.len());
    let mut out = Vec::with_capacity(18 + signal.len() * samples * 4);
    out.extend_from_slice(CACHE_MAGIC);
    out.extend_from_slice(&CACHE_VERSION.to_le_bytes());
    out.extend_from_slice(&(signal.len() as u16).to_le_bytes());
    out.extend_from_slice(&(samples as u32).to_le_bytes());
    out.extend_from_slice(&fs.to_le_bytes());
    for l in signal {
        for v in l {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    std::fs::write(path, out).map_err(io_err(path))
}

/// Read a cache file back as `(signal, fs)`.
pub fn read_cache(path: &Path) -> Result<(Vec<Vec<f32>>, u32), IoError> {
    let b = std::fs::read(path).map_err(io_err(path))?;
    let bad = |reason: &str| IoError::BadCache {
        path: path.display().to_string(),
        reason: reason.to_string(),
    };
    if b.len() < 18 || &b[..4] != CACHE_MAGIC {
        return Err(bad("missing ECGS magic"));
    }
    let u32_at = |i: usize| u32::from_le_bytes(b[i..i + 4].try_into().unwrap());
    if u32_at(4) != CACHE_VERSION {
        return Err(bad("unsupported version"));
    }
    let leads = u16::from_le_bytes([b[8], b[9]]) as usize;
    let samples = u32_at(10) as usize;
    let fs = u32_at(14);
    if b.len() - 18 != leads * samples * 4 {
        return Err(bad("payload size does not match the declared shape"));
    }
    let signal = b[18..]
        .chunks_exact(samples.max(1) * 4)
        .take(leads)
        .map(|lead| {
            lead.chunks_exact(4)
                .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
                .collect()
        })
        .collect();
    Ok((signal, fs))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.ecgs");
        let s = vec![vec![1.0f32, -2.5, f32::MIN_POSITIVE], vec![0.0, 3.0, 7.25]];
        write_cache(&p, &s, 250).unwrap();
        assert_eq!(read_cache(&p).unwrap(), (s, 250));
    }

    #[test]
    fn rejects_truncation() {
        let dir = tempfile::tempdir().unwrap();
        let p = dir.path().join("r.ecgs");
        write_cache(&p, &[vec![1.0f32; 8]], 250).unwrap();
        let mut b = std::fs::read(&p).unwrap();
        b.pop();
        std::fs::write(&p, b).unwrap();
        assert!(matches!(read_cache(&p), Err(IoError::BadCache { .. })));
    }
}
