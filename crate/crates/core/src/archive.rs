//! Single-file tensor archive used for checkpoints and corpora.
//!
//! Layout: the 8-byte magic `LCGANARC`, a little-endian `u32` version, a
//! little-endian `u64` header length, the UTF-8 JSON header, then every
//! tensor's data as little-endian `f32`, row-major, in header order. The
//! header is `{"metadata": <any>, "tensors": [{"name", "shape", "offset",
//! "len"}]}` with `offset`/`len` counted in elements from the start of the
//! data section.

use std::fs;
use std::io::{Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const MAGIC: &[u8; 8] = b"LCGANARC";
pub const VERSION: u32 = 1;

#[derive(Clone, Debug, PartialEq)]
pub struct NamedTensor {
    pub name: String,
    pub shape: Vec<usize>,
    pub data: Vec<f32>,
}

impl NamedTensor {
    pub fn new(name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        Self {
            name: name.into(),
            shape,
            data,
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct Archive {
    pub metadata: serde_json::Value,
    pub tensors: Vec<NamedTensor>,
}

#[derive(Serialize, Deserialize)]
struct IndexEntry {
    name: String,
    shape: Vec<usize>,
    offset: usize,
    len: usize,
}

#[derive(Serialize, Deserialize)]
struct Header {
    metadata: serde_json::Value,
    tensors: Vec<IndexEntry>,
}

impl Archive {
    pub fn new(metadata: serde_json::Value) -> Self {
        Self {
            metadata,
            tensors: Vec::new(),
        }
    }

    pub fn push(&mut self, name: impl Into<String>, shape: Vec<usize>, data: Vec<f32>) {
        self.tensors.push(NamedTensor::new(name, shape, data));
    }

    pub fn tensor(&self, name: &str) -> Result<&NamedTensor> {
        self.tensors
            .iter()
            .find(|t| t.name == name)
            .ok_or_else(|| Error::Archive(format!("no tensor named `{name}`")))
    }

    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut offset = 0;
        let index = self
            .tensors
            .iter()
            .map(|t| {
                let e = IndexEntry {
                    name: t.name.clone(),
                    shape: t.shape.clone(),
                    offset,
                    len: t.data.len(),
                };
                offset += t.data.len();
                e
            })
            .collect();
        let header = serde_json::to_vec(&Header {
            metadata: self.metadata.clone(),
            tensors: index,
        })?;
        let mut out = Vec::with_capacity(20 + header.len() + offset * 4);
        out.extend_from_slice(MAGIC);
        out.extend_from_slice(&VERSION.to_le_bytes());
        out.extend_from_slice(&(header.len() as u64).to_le_bytes());
        out.extend_from_slice(&header);
        for t in &self.tensors {
            for v in &t.data {
                out.extend_from_slice(&v.to_le_bytes());
            }
        }
        Ok(out)
    }

    pub fn from_bytes(bytes: &[u8]) -> Result<Self> {
        if bytes.len() < 20 || &bytes[..8] != MAGIC {
            return Err(Error::Archive("missing archive magic".into()));
        }
        let version = u32::from_le_bytes(bytes[8..12].try_into().expect("4 bytes"));
        if version != VERSION {
            return Err(Error::Archive(format!("unsupported version {version}")));
        }
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().expect("8 bytes")) as usize;
        let data_start = 20usize
            .checked_add(header_len)
            .filter(|&e| e <= bytes.len())
            .ok_or_else(|| Error::Archive("truncated header".into()))?;
        let header: Header = serde_json::from_slice(&bytes[20..data_start])?;
        let data = &bytes[data_start..];
        let mut tensors = Vec::with_capacity(header.tensors.len());
        for e in header.tensors {
            if e.shape.iter().product::<usize>() != e.len {
                return Err(Error::Archive(format!(
                    "tensor `{}` shape {:?} disagrees with length {}",
                    e.name, e.shape, e.len
                )));
            }
            let start = e.offset * 4;
            let end = start + e.len * 4;
            if end > data.len() {
                return Err(Error::Archive(format!("tensor `{}` is truncated", e.name)));
            }
            let values = data[start..end]
                .chunks_exact(4)
                .map(|b| f32::from_le_bytes(b.try_into().expect("4 bytes")))
                .collect();
            tensors.push(NamedTensor {
                name: e.name,
                shape: e.shape,
                data: values,
            });
        }
        Ok(Self {
            metadata: header.metadata,
            tensors,
        })
    }

    pub fn write_to(&self, mut w: impl Write) -> Result<()> {
        w.write_all(&self.to_bytes()?)?;
        Ok(())
    }

    pub fn read_from(mut r: impl Read) -> Result<Self> {
        let mut bytes = Vec::new();
        r.read_to_end(&mut bytes)?;
        Self::from_bytes(&bytes)
    }

    /// Writes through a temporary sibling and renames, so readers never see
    /// a partial file.
    pub fn save(&self, path: &Path) -> Result<()> {
        if let Some(dir) = path.parent() {
            fs::create_dir_all(dir)?;
        }
        let tmp = path.with_extension("partial");
        fs::write(&tmp, self.to_bytes()?)?;
        fs::rename(&tmp, path)?;
        Ok(())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_bytes(&fs::read(path)?)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    proptest! {
        #[test]
        fn bytes_round_trip(values in proptest::collection::vec(-1e6f32..1e6, 0..64), rows in 1usize..4) {
            let n = values.len() / rows * rows;
            let mut a = Archive::new(serde_json::json!({"step": 3, "name": "x"}));
            a.push("w", vec![rows, n / rows], values[..n].to_vec());
            a.push("b", vec![2], vec![1.5, -2.5]);
            let back = Archive::from_bytes(&a.to_bytes().unwrap()).unwrap();
            prop_assert_eq!(back, a);
        }
    }

    #[test]
    fn layout_is_little_endian_after_header() {
        let mut a = Archive::new(serde_json::Value::Null);
        a.push("one", vec![1], vec![1.0]);
        let bytes = a.to_bytes().unwrap();
        assert_eq!(&bytes[..8], MAGIC);
        assert_eq!(&bytes[bytes.len() - 4..], &1.0f32.to_le_bytes());
        let header_len = u64::from_le_bytes(bytes[12..20].try_into().unwrap()) as usize;
        let header: serde_json::Value = serde_json::from_slice(&bytes[20..20 + header_len]).unwrap();
        assert_eq!(header["tensors"][0]["shape"], serde_json::json!([1]));
    }

    #[test]
    fn truncated_archive_rejected() {
        let mut a = Archive::new(serde_json::Value::Null);
        a.push("v", vec![4], vec![0.0; 4]);
        let bytes = a.to_bytes().unwrap();
        assert!(Archive::from_bytes(&bytes[..bytes.len() - 1]).is_err());
        assert!(Archive::from_bytes(b"garbage").is_err());
    }
}
