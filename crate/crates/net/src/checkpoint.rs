//! Binary checkpoints. All integers are little-endian.
//!
//! ```text
//! magic        8 bytes  "ESCHNET\0"
//! version      u32      FORMAT_VERSION
//! config_len   u32
//! config       config_len bytes of JSON (ModelConfig)
//! layers       u32      number of parameter tensors
//! per tensor:
//!   name_len   u16, then name_len bytes of UTF-8
//!   dtype      u8       0 = f32
//!   ndim       u8, then ndim x u32 dims
//! data         every tensor in table order as raw f32
//! ```
//!
//! Parameters are always stored as `f32`; an `f64` model is rounded on save.

use std::fs;
use std::path::Path;

use crate::error::{NetError, Result};
use crate::model::{EscherNet, ModelConfig};
use crate::scalar::Scalar;
use crate::tensor::Tensor;

pub const MAGIC: &[u8; 8] = b"ESCHNET\0";
pub const FORMAT_VERSION: u32 = 1;
const DTYPE_F32: u8 = 0;

pub fn encode<T: Scalar>(model: &EscherNet<T>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let cfg = serde_json::to_vec(&model.cfg).expect("config serializes");
    out.extend_from_slice(&(cfg.len() as u32).to_le_bytes());
    out.extend_from_slice(&cfg);
    let params = model.params();
    out.extend_from_slice(&(params.len() as u32).to_le_bytes());
    for (name, t) in &params {
        out.extend_from_slice(&(name.len() as u16).to_le_bytes());
        out.extend_from_slice(name.as_bytes());
        out.push(DTYPE_F32);
        out.push(t.shape().len() as u8);
        for &d in t.shape() {
            out.extend_from_slice(&(d as u32).to_le_bytes());
        }
    }
    for (_, t) in &params {
        for v in t.data() {
            out.extend_from_slice(&(v.as_f64() as f32).to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.buf.len()).ok_or("truncated file")?;
        let s = &self.buf[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn u8(&mut self) -> std::result::Result<u8, String> {
        Ok(self.take(1)?[0])
    }

    fn u16(&mut self) -> std::result::Result<u16, String> {
        Ok(u16::from_le_bytes(self.take(2)?.try_into().unwrap()))
    }

    fn u32(&mut self) -> std::result::Result<u32, String> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }
}

pub fn decode<T: Scalar>(bytes: &[u8]) -> std::result::Result<EscherNet<T>, String> {
    let mut r = Reader { buf: bytes, pos: 0 };
    if r.take(8)? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32()?;
    if version != FORMAT_VERSION {
        return Err(format!("format version {version}, expected {FORMAT_VERSION}"));
    }
    let len = r.u32()? as usize;
    let cfg: ModelConfig = serde_json::from_slice(r.take(len)?).map_err(|e| format!("config: {e}"))?;
    let mut model = EscherNet::<T>::zeros(cfg).map_err(|e| e.to_string())?;
    let count = r.u32()? as usize;
    let expected: Vec<(&str, Vec<usize>)> = model.params().iter().map(|(n, t)| (*n, t.shape().to_vec())).collect();
    if count != expected.len() {
        return Err(format!("{count} tensors, expected {}", expected.len()));
    }
    for (name, shape) in &expected {
        let n = r.u16()? as usize;
        let got = std::str::from_utf8(r.take(n)?).map_err(|_| "tensor name is not UTF-8")?;
        if got != *name {
            return Err(format!("tensor {got}, expected {name}"));
        }
        if r.u8()? != DTYPE_F32 {
            return Err(format!("{name}: unsupported dtype"));
        }
        let ndim = r.u8()? as usize;
        let dims = (0..ndim).map(|_| r.u32().map(|d| d as usize)).collect::<std::result::Result<Vec<_>, _>>()?;
        if dims != *shape {
            return Err(format!("{name}: shape {dims:?}, expected {shape:?}"));
        }
    }
    for (_, t) in model.params_mut() {
        let shape = t.shape().to_vec();
        let raw = r.take(4 * t.len())?;
        let data = raw
            .chunks_exact(4)
            .map(|c| T::of_f64(f32::from_le_bytes(c.try_into().unwrap()) as f64))
            .collect();
        *t = Tensor::from_vec(&shape, data).map_err(|e| e.to_string())?;
    }
    if r.pos != bytes.len() {
        return Err(format!("{} trailing bytes", bytes.len() - r.pos));
    }
    Ok(model)
}

pub fn save<T: Scalar>(model: &EscherNet<T>, path: &Path) -> Result<()> {
    fs::write(path, encode(model)).map_err(|e| NetError::io(path, e))
}

pub fn load<T: Scalar>(path: &Path) -> Result<EscherNet<T>> {
    let bytes = fs::read(path).map_err(|e| NetError::io(path, e))?;
    decode(&bytes).map_err(|msg| NetError::Checkpoint { path: path.to_path_buf(), msg })
}
