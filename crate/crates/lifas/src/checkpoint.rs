//! Binary model checkpoints.
//!
//! Layout, all integers little-endian `u32`:
//!
//! ```text
//! "LIFASCKPT" | version | spec length | spec JSON
//! then per tensor: name length | name | rank | dims… | f32 values…
//! ```
//!
//! Tensors follow [`Model::named_parameters`] order and run to the end of
//! the file.

use std::collections::BTreeMap;
use std::fs;
use std::path::Path;

use lifas_core::{Model, ModelSpec, Tensor};

use crate::error::{Error, Result};
use crate::fsio::write_atomic;

pub const MAGIC: &[u8; 9] = b"LIFASCKPT";
pub const FORMAT_VERSION: u32 = 1;

fn put_u32(out: &mut Vec<u8>, v: usize) {
    out.extend_from_slice(&u32::try_from(v).expect("checkpoint field fits in u32").to_le_bytes());
}

pub fn encode(model: &Model<f32>) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&FORMAT_VERSION.to_le_bytes());
    let spec = serde_json::to_vec(model.spec()).expect("spec serializes");
    put_u32(&mut out, spec.len());
    out.extend_from_slice(&spec);
    for (name, tensor) in model.named_parameters() {
        put_u32(&mut out, name.len());
        out.extend_from_slice(name.as_bytes());
        put_u32(&mut out, tensor.rank());
        for &d in tensor.dims() {
            put_u32(&mut out, d);
        }
        for v in tensor.data() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize, what: &str) -> std::result::Result<&'a [u8], String> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len());
        match end {
            Some(end) => {
                let s = &self.bytes[self.pos..end];
                self.pos = end;
                Ok(s)
            }
            None => Err(format!("truncated while reading {what} at byte {}", self.pos)),
        }
    }

    fn u32(&mut self, what: &str) -> std::result::Result<usize, String> {
        let b = self.take(4, what)?;
        Ok(u32::from_le_bytes([b[0], b[1], b[2], b[3]]) as usize)
    }

    fn done(&self) -> bool {
        self.pos == self.bytes.len()
    }
}

fn decode_inner(bytes: &[u8]) -> std::result::Result<Model<f32>, String> {
    let mut r = Reader { bytes, pos: 0 };
    if r.take(MAGIC.len(), "magic")? != MAGIC {
        return Err("not a checkpoint (bad magic)".into());
    }
    let version = r.u32("version")?;
    if version != FORMAT_VERSION as usize {
        return Err(format!("unsupported checkpoint version {version}"));
    }
    let spec_len = r.u32("spec length")?;
    let spec: ModelSpec =
        serde_json::from_slice(r.take(spec_len, "spec")?).map_err(|e| format!("model spec: {e}"))?;
    let mut tensors = BTreeMap::new();
    while !r.done() {
        let name_len = r.u32("name length")?;
        let name = String::from_utf8(r.take(name_len, "name")?.to_vec()).map_err(|_| "non-UTF-8 tensor name")?;
        let rank = r.u32("rank")?;
        let dims = (0..rank).map(|_| r.u32("dims")).collect::<std::result::Result<Vec<_>, _>>()?;
        let count = dims.iter().try_fold(1usize, |acc, &d| acc.checked_mul(d)).ok_or("dims overflow")?;
        let raw = r.take(count.checked_mul(4).ok_or("dims overflow")?, &name)?;
        let data = raw
            .chunks_exact(4)
            .map(|b| f32::from_le_bytes([b[0], b[1], b[2], b[3]]))
            .collect();
        let tensor = Tensor::from_vec(&dims, data).map_err(|e| format!("{name}: {e}"))?;
        if tensors.insert(name.clone(), tensor).is_some() {
            return Err(format!("duplicate tensor {name}"));
        }
    }
    Model::from_named(spec, tensors).map_err(|e| e.to_string())
}

pub fn decode(bytes: &[u8], origin: &Path) -> Result<Model<f32>> {
    decode_inner(bytes).map_err(|message| Error::Checkpoint {
        path: origin.to_path_buf(),
        message,
    })
}

pub fn save(path: &Path, model: &Model<f32>) -> Result<()> {
    write_atomic(path, &encode(model))
}

pub fn load(path: &Path) -> Result<Model<f32>> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    decode(&bytes, path)
}
