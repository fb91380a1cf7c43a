//! The `MDPW` checkpoint format.
//!
//! ```text
//! magic "MDPW" | version u32 | count u32
//! per parameter, in name order:
//!   name_len u32 | name bytes (UTF-8) | rank u32 | dims u32 × rank | data f32 × Π dims
//! ```
//!
//! All integers and floats little-endian. Training runs in f64; weights are
//! quantized to f32 on save.

use std::fs;
use std::path::Path;

use super::params::ParamStore;
use super::tensor::Tensor;
use crate::error::{Error, Result};
use crate::io::{ByteReader, ByteWriter};

pub const CHECKPOINT_MAGIC: [u8; 4] = *b"MDPW";
pub const CHECKPOINT_VERSION: u32 = 1;

pub fn encode_checkpoint(store: &ParamStore) -> Result<Vec<u8>> {
    let mut w = ByteWriter::with_capacity(12 + 4 * store.num_elements() + 64 * store.len());
    w.bytes(&CHECKPOINT_MAGIC);
    w.u32(CHECKPOINT_VERSION);
    w.u32(store.len() as u32);
    for (name, t) in store.iter() {
        w.u32(name.len() as u32);
        w.bytes(name.as_bytes());
        w.u32(t.rank() as u32);
        for &d in t.shape() {
            w.u32(
                u32::try_from(d).map_err(|_| Error::invalid(format!("{name}: dim {d} exceeds u32")))?,
            );
        }
        for &v in t.data() {
            w.f32(v as f32);
        }
    }
    Ok(w.into_inner())
}

pub fn decode_checkpoint(bytes: &[u8]) -> Result<ParamStore> {
    let mut r = ByteReader::new(bytes);
    let magic = r.magic()?;
    if magic != CHECKPOINT_MAGIC {
        return Err(Error::BadMagic {
            expected: CHECKPOINT_MAGIC,
            found: magic,
        });
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(Error::BadVersion(version));
    }
    let count = r.u32()?;
    let mut store = ParamStore::new();
    for _ in 0..count {
        let name_len = r.u32()? as usize;
        let name = std::str::from_utf8(r.take(name_len)?)
            .map_err(|_| Error::Malformed("parameter name is not UTF-8".into()))?
            .to_string();
        let rank = r.u32()? as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            shape.push(r.u32()? as usize);
        }
        let n: usize = shape.iter().product();
        r.expect_remaining(4 * n, &name)?;
        let mut data = Vec::with_capacity(n);
        for _ in 0..n {
            data.push(r.f32()? as f64);
        }
        if store.contains(&name) {
            return Err(Error::Malformed(format!("duplicate parameter {name}")));
        }
        store.insert(name, Tensor::new(&shape, data)?);
    }
    if r.remaining() != 0 {
        return Err(Error::Malformed(format!("{} trailing bytes", r.remaining())));
    }
    Ok(store)
}

pub fn save_checkpoint(store: &ParamStore, path: impl AsRef<Path>) -> Result<()> {
    fs::write(path, encode_checkpoint(store)?)?;
    Ok(())
}

pub fn load_checkpoint(path: impl AsRef<Path>) -> Result<ParamStore> {
    decode_checkpoint(&fs::read(path)?)
}
