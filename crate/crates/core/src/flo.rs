//! Middlebury `.flo` container.
//!
//! Layout, all little-endian: `f32` magic `202021.25`, `i32` width, `i32`
//! height, then `height * width` interleaved `(u, v)` `f32` pairs in row-major
//! order.

use crate::error::{Error, Result};
use crate::flow::FlowField;
use crate::scalar::Scalar;

pub const FLO_MAGIC: f32 = 202021.25;
const HEADER_LEN: usize = 12;
const MAX_DIM: i32 = 99_999;

pub fn read_flo<T: Scalar>(bytes: &[u8]) -> Result<FlowField<T>> {
    if bytes.len() < HEADER_LEN {
        return Err(Error::Truncated {
            expected: HEADER_LEN,
            actual: bytes.len(),
        });
    }
    let magic = f32::from_le_bytes(bytes[0..4].try_into().unwrap());
    if magic.to_bits() != FLO_MAGIC.to_bits() {
        return Err(Error::BadMagic(magic));
    }
    let width = i32::from_le_bytes(bytes[4..8].try_into().unwrap());
    let height = i32::from_le_bytes(bytes[8..12].try_into().unwrap());
    if width <= 0 || height <= 0 || width > MAX_DIM || height > MAX_DIM {
        return Err(Error::BadDims {
            width: width as i64,
            height: height as i64,
        });
    }
    let (w, h) = (width as usize, height as usize);
    let expected = HEADER_LEN + 8 * w * h;
    if bytes.len() != expected {
        return Err(Error::Truncated {
            expected,
            actual: bytes.len(),
        });
    }
    let mut vectors = Vec::with_capacity(w * h);
    for (site, chunk) in bytes[HEADER_LEN..].chunks_exact(8).enumerate() {
        let u = f32::from_le_bytes(chunk[0..4].try_into().unwrap());
        let v = f32::from_le_bytes(chunk[4..8].try_into().unwrap());
        if !u.is_finite() || !v.is_finite() {
            return Err(Error::NonFinite { site });
        }
        vectors.push([T::lit(u as f64), T::lit(v as f64)]);
    }
    FlowField::new(w, h, vectors)
}

/// Encodes a field as `.flo`. Components are stored as `f32`, so `f64`
/// fields round-trip exactly only when their values are `f32`-representable.
pub fn write_flo<T: Scalar>(f: &FlowField<T>) -> Vec<u8> {
    let mut out = Vec::with_capacity(HEADER_LEN + 8 * f.len());
    out.extend_from_slice(&FLO_MAGIC.to_le_bytes());
    out.extend_from_slice(&(f.width() as i32).to_le_bytes());
    out.extend_from_slice(&(f.height() as i32).to_le_bytes());
    for v in f.vectors() {
        out.extend_from_slice(&(v[0].as_f64() as f32).to_le_bytes());
        out.extend_from_slice(&(v[1].as_f64() as f32).to_le_bytes());
    }
    out
}
