//! FMAP tensor files.
//!
//! Layout (all little-endian):
//!
//! ```text
//! offset  size  field
//! 0       4     magic "FMAP"
//! 4       4     u32 version (= 1)
//! 8       4     u32 height
//! 12      4     u32 width
//! 16      4     u32 depth
//! 20      4·N   f32 values, N = height·width·depth, row-major, channels
//!               interleaved per pixel
//! ```

use std::path::Path;

use super::maps::{FeatureMap, ScalarMap};
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 4] = b"FMAP";
pub const VERSION: u32 = 1;
pub const HEADER_LEN: usize = 20;

/// A decoded FMAP file. Depth-1 tensors decode as [`Tensor::Scalar`].
#[derive(Debug, Clone, PartialEq)]
pub enum Tensor {
    Scalar(ScalarMap),
    Features(FeatureMap),
}

impl Tensor {
    pub fn depth(&self) -> usize {
        match self {
            Tensor::Scalar(_) => 1,
            Tensor::Features(f) => f.depth(),
        }
    }

    pub fn into_features(self) -> FeatureMap {
        match self {
            Tensor::Scalar(s) => s.into(),
            Tensor::Features(f) => f,
        }
    }

    pub fn into_scalar(self) -> Result<ScalarMap> {
        match self {
            Tensor::Scalar(s) => Ok(s),
            Tensor::Features(f) => Err(Error::InvalidInput(format!(
                "expected a depth-1 tensor, found depth {}",
                f.depth()
            ))),
        }
    }
}

/// Anything that can be written as an FMAP tensor.
pub trait TensorData {
    /// `(height, width, depth)`
    fn shape(&self) -> (usize, usize, usize);
    fn values(&self) -> &[f32];
}

impl TensorData for ScalarMap {
    fn shape(&self) -> (usize, usize, usize) {
        (self.height(), self.width(), 1)
    }

    fn values(&self) -> &[f32] {
        self.data()
    }
}

impl TensorData for FeatureMap {
    fn shape(&self) -> (usize, usize, usize) {
        (self.height(), self.width(), self.depth())
    }

    fn values(&self) -> &[f32] {
        self.data()
    }
}

impl TensorData for Tensor {
    fn shape(&self) -> (usize, usize, usize) {
        match self {
            Tensor::Scalar(s) => s.shape(),
            Tensor::Features(f) => f.shape(),
        }
    }

    fn values(&self) -> &[f32] {
        match self {
            Tensor::Scalar(s) => s.values(),
            Tensor::Features(f) => f.values(),
        }
    }
}

pub fn encode_tensor<T: TensorData + ?Sized>(tensor: &T) -> Result<Vec<u8>> {
    let (h, w, d) = tensor.shape();
    let dim = |v: usize, name: &str| {
        u32::try_from(v)
            .map_err(|_| Error::InvalidInput(format!("{name} {v} does not fit in u32")))
    };
    let (h32, w32, d32) = (dim(h, "height")?, dim(w, "width")?, dim(d, "depth")?);
    let values = tensor.values();
    let mut out = Vec::with_capacity(HEADER_LEN + values.len() * 4);
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&h32.to_le_bytes());
    out.extend_from_slice(&w32.to_le_bytes());
    out.extend_from_slice(&d32.to_le_bytes());
    for v in values {
        out.extend_from_slice(&v.to_le_bytes());
    }
    Ok(out)
}

pub fn decode_tensor(bytes: &[u8]) -> Result<Tensor> {
    if bytes.len() < 4 {
        return Err(Error::format(bytes.len() as u64, "truncated magic"));
    }
    if &bytes[..4] != MAGIC {
        return Err(Error::format(0, "bad magic, expected \"FMAP\""));
    }
    let read_u32 = |offset: usize, name: &str| -> Result<u32> {
        bytes
            .get(offset..offset + 4)
            .map(|b| u32::from_le_bytes(b.try_into().unwrap()))
            .ok_or_else(|| Error::format(bytes.len() as u64, format!("truncated header ({name})")))
    };
    let version = read_u32(4, "version")?;
    if version != VERSION {
        return Err(Error::format(4, format!("unsupported version {version}")));
    }
    let h = read_u32(8, "height")? as usize;
    let w = read_u32(12, "width")? as usize;
    let d = read_u32(16, "depth")? as usize;
    for (offset, v) in [(8u64, h), (12, w), (16, d)] {
        if v == 0 {
            return Err(Error::format(offset, "empty dimension"));
        }
    }
    let count = h
        .checked_mul(w)
        .and_then(|n| n.checked_mul(d))
        .filter(|n| n.checked_mul(4).is_some())
        .ok_or_else(|| Error::format(8, format!("dimension overflow: {h}x{w}x{d}")))?;
    let payload = &bytes[HEADER_LEN..];
    let expected = count * 4;
    if payload.len() < expected {
        return Err(Error::format(
            bytes.len() as u64,
            format!(
                "truncated payload: header declares {count} values, found {} bytes",
                payload.len()
            ),
        ));
    }
    if payload.len() > expected {
        return Err(Error::format(
            (HEADER_LEN + expected) as u64,
            "trailing bytes after payload",
        ));
    }
    let data: Vec<f32> = payload
        .chunks_exact(4)
        .map(|c| f32::from_le_bytes(c.try_into().unwrap()))
        .collect();
    Ok(if d == 1 {
        Tensor::Scalar(ScalarMap::new(h, w, data)?)
    } else {
        Tensor::Features(FeatureMap::new(h, w, d, data)?)
    })
}

pub fn read_tensor(path: impl AsRef<Path>) -> Result<Tensor> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_tensor(&bytes).map_err(|e| match e {
        Error::Format { offset, reason } => Error::Format {
            offset,
            reason: format!("{}: {reason}", path.display()),
        },
        other => other,
    })
}

pub fn write_tensor<T: TensorData + ?Sized>(tensor: &T, path: impl AsRef<Path>) -> Result<()> {
    let path = path.as_ref();
    let bytes = encode_tensor(tensor)?;
    std::fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
