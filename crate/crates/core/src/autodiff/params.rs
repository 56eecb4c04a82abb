//! Named parameter tensors with a stable flat layout and binary checkpoints.
//!
//! Checkpoint layout (all integers little-endian):
//!
//! ```text
//! magic  b"AMSCKPT\0"
//! u32    format version (1)
//! u32    entry count
//! per entry: u32 name length, name bytes, u64 rows, u64 cols
//! per entry: rows*cols f64 values
//! ```

use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;

use crate::tensor::Tensor;
use crate::{Error, Result};

const MAGIC: &[u8; 8] = b"AMSCKPT\0";
const VERSION: u32 = 1;

#[derive(Debug, Clone, Default)]
pub struct ParamStore {
    names: Vec<String>,
    tensors: Vec<Tensor>,
    offsets: Vec<usize>,
    index: HashMap<String, usize>,
}

impl ParamStore {
    pub fn new() -> Self {
        ParamStore::default()
    }

    pub fn insert(&mut self, name: &str, tensor: Tensor) -> Result<usize> {
        if self.index.contains_key(name) {
            return Err(Error::DuplicateParam(name.to_string()));
        }
        let slot = self.tensors.len();
        let offset = self.n_flat();
        self.names.push(name.to_string());
        self.offsets.push(offset);
        self.tensors.push(tensor);
        self.index.insert(name.to_string(), slot);
        Ok(slot)
    }

    pub fn slot_of(&self, name: &str) -> Result<usize> {
        self.index
            .get(name)
            .copied()
            .ok_or_else(|| Error::UnknownParam(name.to_string()))
    }

    pub fn tensor(&self, slot: usize) -> &Tensor {
        &self.tensors[slot]
    }

    pub fn get(&self, name: &str) -> Result<&Tensor> {
        Ok(self.tensor(self.slot_of(name)?))
    }

    pub fn len(&self) -> usize {
        self.tensors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tensors.is_empty()
    }

    /// Total scalar count across all parameters.
    pub fn n_flat(&self) -> usize {
        self.offsets.last().map_or(0, |o| o + self.tensors.last().unwrap().len())
    }

    /// `(flat offset, length)` of a slot.
    pub fn slot_range(&self, slot: usize) -> (usize, usize) {
        (self.offsets[slot], self.tensors[slot].len())
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }

    /// `(name, rows, cols)` per entry, in layout order.
    pub fn manifest(&self) -> Vec<(String, usize, usize)> {
        self.names
            .iter()
            .zip(&self.tensors)
            .map(|(n, t)| (n.clone(), t.rows(), t.cols()))
            .collect()
    }

    pub fn flatten(&self) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_flat());
        for t in &self.tensors {
            out.extend_from_slice(t.data());
        }
        out
    }

    pub fn assign_flat(&mut self, flat: &[f64]) -> Result<()> {
        if flat.len() != self.n_flat() {
            return Err(Error::ShapeMismatch {
                op: "assign_flat",
                lhs: format!("{} store scalars", self.n_flat()),
                rhs: format!("{} provided", flat.len()),
            });
        }
        let mut at = 0;
        for t in &mut self.tensors {
            let len = t.len();
            t.data_mut().copy_from_slice(&flat[at..at + len]);
            at += len;
        }
        Ok(())
    }

    pub fn get_flat(&self, i: usize) -> f64 {
        let slot = self.slot_for_flat(i);
        self.tensors[slot].data()[i - self.offsets[slot]]
    }

    pub fn set_flat(&mut self, i: usize, v: f64) {
        let slot = self.slot_for_flat(i);
        let off = self.offsets[slot];
        self.tensors[slot].data_mut()[i - off] = v;
    }

    fn slot_for_flat(&self, i: usize) -> usize {
        debug_assert!(i < self.n_flat());
        match self.offsets.binary_search(&i) {
            Ok(s) => s,
            Err(s) => s - 1,
        }
    }

    /// Error unless `other` has identical names and shapes in identical order.
    pub fn validate_manifest(&self, other: &ParamStore) -> Result<()> {
        if self.manifest() != other.manifest() {
            return Err(Error::Checkpoint(
                "parameter manifest does not match the configured model".to_string(),
            ));
        }
        Ok(())
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        let mut buf: Vec<u8> = Vec::new();
        buf.extend_from_slice(MAGIC);
        buf.extend_from_slice(&VERSION.to_le_bytes());
        buf.extend_from_slice(&(self.tensors.len() as u32).to_le_bytes());
        for (name, t) in self.names.iter().zip(&self.tensors) {
            buf.extend_from_slice(&(name.len() as u32).to_le_bytes());
            buf.extend_from_slice(name.as_bytes());
            buf.extend_from_slice(&(t.rows() as u64).to_le_bytes());
            buf.extend_from_slice(&(t.cols() as u64).to_le_bytes());
        }
        for t in &self.tensors {
            for v in t.data() {
                buf.extend_from_slice(&v.to_le_bytes());
            }
        }
        let mut f = std::fs::File::create(path).map_err(|e| Error::io(path, e))?;
        f.write_all(&buf).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let mut bytes = Vec::new();
        std::fs::File::open(path)
            .and_then(|mut f| f.read_to_end(&mut bytes))
            .map_err(|e| Error::io(path, e))?;
        Self::from_bytes(&bytes)
    }

    fn from_bytes(bytes: &[u8]) -> Result<Self> {
        let fail = |msg: &str| Error::Checkpoint(msg.to_string());
        let mut at = 0usize;
        let take = |at: &mut usize, n: usize| -> Result<&[u8]> {
            if *at + n > bytes.len() {
                return Err(fail("truncated checkpoint"));
            }
            let s = &bytes[*at..*at + n];
            *at += n;
            Ok(s)
        };
        if take(&mut at, 8)? != MAGIC {
            return Err(fail("bad magic; not a checkpoint file"));
        }
        let version = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap());
        if version != VERSION {
            return Err(fail(&format!("unsupported checkpoint version {version}")));
        }
        let count = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
        let mut shapes = Vec::with_capacity(count);
        for _ in 0..count {
            let name_len = u32::from_le_bytes(take(&mut at, 4)?.try_into().unwrap()) as usize;
            let name = std::str::from_utf8(take(&mut at, name_len)?)
                .map_err(|_| fail("invalid parameter name"))?
                .to_string();
            let rows = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()) as usize;
            let cols = u64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()) as usize;
            shapes.push((name, rows, cols));
        }
        let mut store = ParamStore::new();
        for (name, rows, cols) in shapes {
            let mut data = Vec::with_capacity(rows * cols);
            for _ in 0..rows * cols {
                data.push(f64::from_le_bytes(take(&mut at, 8)?.try_into().unwrap()));
            }
            store.insert(&name, Tensor::from_vec(rows, cols, data)?)?;
        }
        if at != bytes.len() {
            return Err(fail("trailing bytes after checkpoint payload"));
        }
        Ok(store)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn store() -> ParamStore {
        let mut s = ParamStore::new();
        s.insert("w", Tensor::from_vec(2, 2, vec![1.0, 2.0, 3.0, 4.0]).unwrap())
            .unwrap();
        s.insert("b", Tensor::from_vec(1, 2, vec![-1.0, 0.5]).unwrap())
            .unwrap();
        s
    }

    #[test]
    fn flat_roundtrip_is_exact() {
        let mut s = store();
        let flat = s.flatten();
        assert_eq!(flat.len(), 6);
        s.assign_flat(&flat).unwrap();
        assert_eq!(s.flatten(), flat);
        assert_eq!(s.get_flat(4), -1.0);
        s.set_flat(4, 9.0);
        assert_eq!(s.get("b").unwrap().get(0, 0), 9.0);
    }

    #[test]
    fn duplicate_names_rejected() {
        let mut s = store();
        assert!(s.insert("w", Tensor::zeros(1, 1)).is_err());
    }

    #[test]
    fn checkpoint_roundtrip() {
        let s = store();
        let dir = std::env::temp_dir().join("amshortcut-params-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("test.ckpt");
        s.save(&path).unwrap();
        let back = ParamStore::load(&path).unwrap();
        assert_eq!(back.manifest(), s.manifest());
        assert_eq!(back.flatten(), s.flatten());
        s.validate_manifest(&back).unwrap();
    }

    #[test]
    fn corrupt_checkpoint_rejected() {
        assert!(ParamStore::from_bytes(b"not a checkpoint").is_err());
        let s = store();
        let dir = std::env::temp_dir().join("amshortcut-params-test");
        std::fs::create_dir_all(&dir).unwrap();
        let path = dir.join("trunc.ckpt");
        s.save(&path).unwrap();
        let mut bytes = std::fs::read(&path).unwrap();
        bytes.truncate(bytes.len() - 3);
        assert!(ParamStore::from_bytes(&bytes).is_err());
    }
}
