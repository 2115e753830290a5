//! Binary weight files.
//!
//! Layout, all integers little-endian: `b"FRUL"`, version `u16`, tensor count
//! `u32`, then per tensor: name length `u16`, UTF-8 name, rank `u8`, each dim
//! as `u32`, and the row-major values as IEEE-754 `f64`.

use thiserror::Error;

use crate::nn::ModelParams;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 4] = b"FRUL";
pub const VERSION: u16 = 1;

#[derive(Debug, Clone, PartialEq, Eq, Error)]
pub enum WireError {
    #[error("not a weight file (bad magic)")]
    BadMagic,
    #[error("unsupported weight file version {0}")]
    UnsupportedVersion(u16),
    #[error("truncated at byte {offset}: needed {needed} more bytes")]
    Truncated { offset: usize, needed: usize },
    #[error("inconsistent weight file: {0}")]
    Inconsistent(String),
}

pub fn serialize_params(params: &ModelParams) -> Result<Vec<u8>, WireError> {
    let mut out = Vec::with_capacity(10 + params.scalar_count() * 8 + params.len() * 32);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(params.len())
        .map_err(|_| WireError::Inconsistent("too many tensors".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for (name, t) in params.iter() {
        let len = u16::try_from(name.len())
            .map_err(|_| WireError::Inconsistent(format!("name too long: {} bytes", name.len())))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        let rank = u8::try_from(t.rank())
            .map_err(|_| WireError::Inconsistent(format!("{name}: rank {} too large", t.rank())))?;
        out.push(rank);
        for &d in t.shape() {
            let d = u32::try_from(d)
                .map_err(|_| WireError::Inconsistent(format!("{name}: dimension {d} too large")))?;
            out.extend_from_slice(&d.to_le_bytes());
        }
        for v in t.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], WireError> {
        let left = self.bytes.len() - self.pos;
        if left < n {
            return Err(WireError::Truncated {
                offset: self.bytes.len(),
                needed: n - left,
            });
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], WireError> {
        Ok(self.take(N)?.try_into().expect("exact length"))
    }
}

pub fn deserialize_params(bytes: &[u8]) -> Result<ModelParams, WireError> {
    if bytes.len() >= MAGIC.len() && &bytes[..4] != MAGIC
        || bytes.len() < MAGIC.len() && !MAGIC.starts_with(bytes)
    {
        return Err(WireError::BadMagic);
    }
    let mut r = Reader { bytes, pos: 0 };
    r.take(4)?;
    let version = u16::from_le_bytes(r.array()?);
    if version != VERSION {
        return Err(WireError::UnsupportedVersion(version));
    }
    let count = u32::from_le_bytes(r.array()?) as usize;
    let mut entries = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = u16::from_le_bytes(r.array()?) as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| WireError::Inconsistent("tensor name is not UTF-8".into()))?
            .to_string();
        let rank = r.array::<1>()?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(u32::from_le_bytes(r.array()?) as usize);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .and_then(|n| n.checked_mul(8))
            .ok_or_else(|| WireError::Inconsistent(format!("{name}: shape {shape:?} overflows")))?;
        let raw = r.take(n)?;
        let data = raw
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes")))
            .collect();
        let t =
            Tensor::from_vec(&shape, data).map_err(|e| WireError::Inconsistent(e.to_string()))?;
        entries.push((name, t));
    }
    if r.pos != bytes.len() {
        return Err(WireError::Inconsistent(format!(
            "{} trailing bytes after {count} tensors",
            bytes.len() - r.pos
        )));
    }
    ModelParams::new(entries).map_err(|e| WireError::Inconsistent(e.to_string()))
}

/// Human-readable dump: tensor names mapped to shapes and values.
pub fn params_to_json(params: &ModelParams) -> String {
    let tensors: Vec<serde_json::Value> = params
        .iter()
        .map(|(name, t)| {
            serde_json::json!({
                "name": name,
                "shape": t.shape(),
                "values": t.data(),
            })
        })
        .collect();
    let doc = serde_json::json!({
        "format": "FRUL",
        "version": VERSION,
        "tensors": tensors,
    });
    serde_json::to_string_pretty(&doc).expect("json values serialize")
}
