//! Versioned binary parameter snapshot: magic, count, then per tensor its
//! name, shape and little-endian values.

use std::io::{Read, Write};
use std::path::Path;

use ndarray::Array2;

use crate::autograd::ParamStore;
use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"MRLCKPT1";

pub fn encode(store: &ParamStore) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&(store.len() as u64).to_le_bytes());
    for id in store.ids() {
        let name = store.name(id).as_bytes();
        out.extend_from_slice(&(name.len() as u64).to_le_bytes());
        out.extend_from_slice(name);
        let t = store.value(id);
        out.extend_from_slice(&(t.nrows() as u64).to_le_bytes());
        out.extend_from_slice(&(t.ncols() as u64).to_le_bytes());
        for v in t.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    out
}

struct Cursor<'a> {
    bytes: &'a [u8],
    at: usize,
}

impl Cursor<'_> {
    fn take(&mut self, n: usize) -> Result<&[u8]> {
        let end = self.at.checked_add(n).filter(|&e| e <= self.bytes.len());
        let end = end.ok_or_else(|| Error::Checkpoint(format!("truncated at byte {}", self.at)))?;
        let s = &self.bytes[self.at..end];
        self.at = end;
        Ok(s)
    }

    fn u64(&mut self) -> Result<u64> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().expect("8 bytes")))
    }

    fn len(&mut self) -> Result<usize> {
        let v = self.u64()?;
        usize::try_from(v)
            .ok()
            .filter(|&n| n <= self.bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("implausible length {v}")))
    }
}

/// Decode into `(name, tensor)` pairs.
pub fn decode(bytes: &[u8]) -> Result<Vec<(String, Array2<f64>)>> {
    let mut c = Cursor { bytes, at: 0 };
    if c.take(8)? != MAGIC {
        return Err(Error::Checkpoint("not a checkpoint (bad magic)".into()));
    }
    let n = c.len()?;
    let mut out = Vec::with_capacity(n.min(4096));
    for _ in 0..n {
        let len = c.len()?;
        let name = String::from_utf8(c.take(len)?.to_vec())
            .map_err(|_| Error::Checkpoint("parameter name is not UTF-8".into()))?;
        let (rows, cols) = (c.len()?, c.len()?);
        let count = rows
            .checked_mul(cols)
            .filter(|&k| k.saturating_mul(8) <= bytes.len())
            .ok_or_else(|| Error::Checkpoint(format!("implausible shape {rows}x{cols}")))?;
        let raw = c.take(count * 8)?;
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("8 bytes")))
            .collect();
        out.push((name, Array2::from_shape_vec((rows, cols), values).expect("size checked")));
    }
    if c.at != bytes.len() {
        return Err(Error::Checkpoint(format!("{} trailing bytes", bytes.len() - c.at)));
    }
    Ok(out)
}

/// Overwrite `store` from a decoded checkpoint; names and shapes must match.
pub fn restore(store: &mut ParamStore, tensors: Vec<(String, Array2<f64>)>) -> Result<()> {
    if tensors.len() != store.len() {
        return Err(Error::Checkpoint(format!(
            "checkpoint holds {} tensors, model has {}",
            tensors.len(),
            store.len()
        )));
    }
    for (name, t) in tensors {
        let id = store
            .get(&name)
            .ok_or_else(|| Error::Checkpoint(format!("unknown parameter `{name}`")))?;
        if store.value(id).dim() != t.dim() {
            return Err(Error::Checkpoint(format!(
                "`{name}` has shape {:?}, checkpoint {:?}",
                store.value(id).dim(),
                t.dim()
            )));
        }
        store.set(id, t);
    }
    Ok(())
}

pub fn save(store: &ParamStore, path: &Path) -> Result<()> {
    let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
    f.write_all(&encode(store)).map_err(|e| Error::io(path, e))
}

pub fn load(store: &mut ParamStore, path: &Path) -> Result<()> {
    let mut bytes = Vec::new();
    std::fs::File::open(path)
        .and_then(|mut f| f.read_to_end(&mut bytes))
        .map_err(|e| Error::io(path, e))?;
    restore(store, decode(&bytes)?)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autograd::Init;
    use rand::SeedableRng;

    #[test]
    fn round_trip_and_corruption() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(0);
        let mut a = ParamStore::new();
        a.add("x.w", (3, 2), Init::Glorot, &mut rng);
        a.add("x.b", (1, 2), Init::Uniform(1.0), &mut rng);
        let bytes = encode(&a);
        let mut b = ParamStore::new();
        b.add("x.w", (3, 2), Init::Zeros, &mut rng);
        b.add("x.b", (1, 2), Init::Zeros, &mut rng);
        restore(&mut b, decode(&bytes).unwrap()).unwrap();
        for id in a.ids() {
            assert_eq!(a.value(id), b.value(id));
        }
        assert!(decode(&bytes[..bytes.len() - 3]).is_err());
        assert!(decode(b"MRLCKPT0").is_err());
    }
}
