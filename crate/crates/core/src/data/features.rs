//! Feature matrix files.
//!
//! ```text
//! offset 0   "MRF1"
//! offset 4   rows  (u32 little-endian)
//! offset 8   cols  (u32 little-endian)
//! offset 12  rows × cols f32 little-endian, row-major
//! ```

use std::fs;
use std::path::Path;

use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

pub const FEATURE_MAGIC: &[u8; 4] = b"MRF1";
pub const FEATURE_HEADER_LEN: usize = 12;

pub fn encode_feature_matrix<T: Scalar>(t: &Tensor<T>) -> Result<Vec<u8>> {
    let (rows, cols) = t.dims2()?;
    let (r32, c32) = match (u32::try_from(rows), u32::try_from(cols)) {
        (Ok(r), Ok(c)) => (r, c),
        _ => {
            return Err(Error::InvalidArgument(format!(
                "feature matrix {rows}×{cols} does not fit u32 extents"
            )))
        }
    };
    let mut out = Vec::with_capacity(FEATURE_HEADER_LEN + 4 * t.len());
    out.extend_from_slice(FEATURE_MAGIC);
    out.extend_from_slice(&r32.to_le_bytes());
    out.extend_from_slice(&c32.to_le_bytes());
    for &x in t.data() {
        out.extend_from_slice(&x.as_f32().to_le_bytes());
    }
    Ok(out)
}

pub fn decode_feature_matrix<T: Scalar>(bytes: &[u8], path: &Path) -> Result<Tensor<T>> {
    let fail = |offset: usize, reason: String| Error::Format {
        path: path.to_path_buf(),
        offset: offset as u64,
        reason,
    };
    if bytes.len() < 4 {
        return Err(fail(bytes.len(), "truncated before end of magic".into()));
    }
    if &bytes[..4] != FEATURE_MAGIC {
        return Err(fail(
            0,
            format!("bad magic {:?}, expected \"MRF1\"", String::from_utf8_lossy(&bytes[..4])),
        ));
    }
    if bytes.len() < FEATURE_HEADER_LEN {
        return Err(fail(bytes.len(), "truncated header".into()));
    }
    let rows = u32::from_le_bytes(bytes[4..8].try_into().expect("4 bytes"));
    let cols = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
    let payload = u64::from(rows)
        .checked_mul(u64::from(cols))
        .and_then(|n| n.checked_mul(4))
        .filter(|&n| n <= (usize::MAX - FEATURE_HEADER_LEN) as u64)
        .ok_or_else(|| fail(4, format!("rows·cols overflows ({rows}×{cols})")))?
        as usize;
    let have = bytes.len() - FEATURE_HEADER_LEN;
    if have < payload {
        return Err(fail(
            bytes.len(),
            format!("truncated payload: {rows}×{cols} needs {payload} bytes, found {have}"),
        ));
    }
    if have > payload {
        return Err(fail(
            FEATURE_HEADER_LEN + payload,
            format!("{} trailing bytes after payload", have - payload),
        ));
    }
    let data = bytes[FEATURE_HEADER_LEN..]
        .chunks_exact(4)
        .map(|b| T::of_f32(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
        .collect();
    Tensor::new(&[rows as usize, cols as usize], data)
}

pub fn read_feature_file<T: Scalar>(path: &Path) -> Result<Tensor<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_feature_matrix(&bytes, path)
}

pub fn write_feature_file<T: Scalar>(path: &Path, t: &Tensor<T>) -> Result<()> {
    let bytes = encode_feature_matrix(t)?;
    fs::write(path, bytes).map_err(|e| Error::io(path, e))
}
