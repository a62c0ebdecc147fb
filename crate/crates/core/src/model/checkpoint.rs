//! Binary checkpoint container.
//!
//! ```text
//! "MRCK"                      magic
//! u32 version                 currently 1
//! u16 n, n bytes              revision string (UTF-8)
//! u32 d, d_video, d_asr, d_query, conv_width
//! u8  use_av_encoder, use_pointer, use_2dp
//! u32 tensor count
//! per tensor:
//!   u16 n, n bytes            parameter name
//!   u8 rank, u32 × rank       shape
//!   f32 × product(shape)      row-major payload
//! ```
//!
//! All integers and floats are little-endian. Payloads are stored as `f32`
//! regardless of the precision the model was trained in.

use std::fs;
use std::path::Path;

use super::{AblationConfig, ModelConfig, ModelParams};
use crate::error::{Error, Result};
use crate::numerics::{Scalar, Tensor};

pub const CHECKPOINT_MAGIC: &[u8; 4] = b"MRCK";
pub const CHECKPOINT_VERSION: u32 = 1;
pub const CHECKPOINT_REVISION: &str = "2dp-mrc/r1";

pub fn encode_checkpoint<T: Scalar>(model: &ModelParams<T>) -> Vec<u8> {
    let c = &model.config;
    let mut out = Vec::with_capacity(64 + model.store.num_scalars() * 4);
    out.extend_from_slice(CHECKPOINT_MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    put_str(&mut out, CHECKPOINT_REVISION);
    for v in [c.d, c.d_video, c.d_asr, c.d_query, c.conv_width] {
        out.extend_from_slice(&(v as u32).to_le_bytes());
    }
    let ab = c.ablation;
    out.extend_from_slice(&[
        u8::from(ab.use_av_encoder),
        u8::from(ab.use_pointer),
        u8::from(ab.use_2dp),
    ]);
    out.extend_from_slice(&(model.store.len() as u32).to_le_bytes());
    for (name, t) in model.store.iter() {
        put_str(&mut out, name);
        out.push(t.rank() as u8);
        for &e in t.shape() {
            out.extend_from_slice(&(e as u32).to_le_bytes());
        }
        for &x in t.data() {
            out.extend_from_slice(&x.as_f32().to_le_bytes());
        }
    }
    out
}

fn put_str(out: &mut Vec<u8>, s: &str) {
    out.extend_from_slice(&(s.len() as u16).to_le_bytes());
    out.extend_from_slice(s.as_bytes());
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
    path: &'a Path,
}

impl<'a> Reader<'a> {
    fn err(&self, reason: impl Into<String>) -> Error {
        Error::Format {
            path: self.path.to_path_buf(),
            offset: self.pos as u64,
            reason: reason.into(),
        }
    }

    fn take(&mut self, n: usize) -> Result<&'a [u8]> {
        if self.bytes.len() - self.pos < n {
            return Err(self.err(format!("truncated: needed {n} more bytes")));
        }
        let s = &self.bytes[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u8(&mut self) -> Result<u8> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> Result<u16> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().expect("2 bytes")))
    }

    fn u32(&mut self) -> Result<u32> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().expect("4 bytes")))
    }

    fn string(&mut self) -> Result<String> {
        let n = self.u16()? as usize;
        let at = self.pos;
        let raw = self.take(n)?;
        String::from_utf8(raw.to_vec()).map_err(|_| Error::Format {
            path: self.path.to_path_buf(),
            offset: at as u64,
            reason: "string is not UTF-8".into(),
        })
    }

    fn flag(&mut self) -> Result<bool> {
        match self.u8()? {
            0 => Ok(false),
            1 => Ok(true),
            v => Err(self.err(format!("flag byte must be 0 or 1, got {v}"))),
        }
    }
}

pub fn decode_checkpoint<T: Scalar>(bytes: &[u8], path: &Path) -> Result<ModelParams<T>> {
    let mut r = Reader { bytes, pos: 0, path };
    if r.take(4)? != CHECKPOINT_MAGIC {
        r.pos = 0;
        return Err(r.err("bad magic, expected \"MRCK\""));
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(r.err(format!("unsupported checkpoint version {version}")));
    }
    let revision = r.string()?;
    if revision != CHECKPOINT_REVISION {
        return Err(r.err(format!("unknown revision {revision:?}")));
    }
    let d = r.u32()? as usize;
    let d_video = r.u32()? as usize;
    let d_asr = r.u32()? as usize;
    let d_query = r.u32()? as usize;
    let conv_width = r.u32()? as usize;
    let ablation = AblationConfig {
        use_av_encoder: r.flag()?,
        use_pointer: r.flag()?,
        use_2dp: r.flag()?,
    };
    let config = ModelConfig {
        d,
        d_video,
        d_asr,
        d_query,
        conv_width,
        ablation,
    };
    config.validate()?;
    let mut model = ModelParams::<T>::init(config, 0)?;
    let count = r.u32()? as usize;
    if count != model.store.len() {
        return Err(r.err(format!(
            "expected {} tensors, found {count}",
            model.store.len()
        )));
    }
    let mut seen = vec![false; count];
    for _ in 0..count {
        let at = r.pos;
        let name = r.string()?;
        let id = model
            .store
            .find(&name)
            .ok_or_else(|| r.err(format!("unknown parameter {name:?}")))?;
        if std::mem::replace(&mut seen[id.index()], true) {
            return Err(r.err(format!("duplicate parameter {name:?}")));
        }
        let rank = r.u8()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        if shape != model.store.get(id).shape() {
            return Err(Error::Format {
                path: path.to_path_buf(),
                offset: at as u64,
                reason: format!(
                    "parameter {name:?} has shape {shape:?}, model expects {:?}",
                    model.store.get(id).shape()
                ),
            });
        }
        let n: usize = shape.iter().product();
        let raw = r.take(n * 4)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| T::of_f32(f32::from_le_bytes(b.try_into().expect("4 bytes"))))
            .collect();
        model.store.set(id, Tensor::new(&shape, data)?)?;
    }
    if r.pos != bytes.len() {
        return Err(r.err("trailing bytes after last tensor"));
    }
    Ok(model)
}

pub fn save_checkpoint<T: Scalar>(model: &ModelParams<T>, path: &Path) -> Result<()> {
    fs::write(path, encode_checkpoint(model)).map_err(|e| Error::io(path, e))
}

pub fn load_checkpoint<T: Scalar>(path: &Path) -> Result<ModelParams<T>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode_checkpoint(&bytes, path)
}
