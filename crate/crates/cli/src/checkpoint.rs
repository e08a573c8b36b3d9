//! Binary checkpoints of named `f64` arrays.
//!
//! Layout, all integers little-endian:
//!
//! ```text
//! "ADCK"  u32 version  u32 count
//! count × { u16 name_len  name  u8 rank  rank × u64 dim  product(dims) × f64 }
//! ```

use std::fs;
use std::io;
use std::path::Path;

use adcluster::{ClassifierHead, Encoder, Parameters, StyleGenerator};
use ndarray::{Array1, Array2, ArrayD, IxDyn};

pub const MAGIC: &[u8; 4] = b"ADCK";
pub const VERSION: u32 = 1;

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint I/O: {0}")]
    Io(#[from] io::Error),
    #[error("not a checkpoint (magic {0:?})")]
    BadMagic([u8; 4]),
    #[error("unsupported checkpoint version {0} (expected {VERSION})")]
    Version(u32),
    #[error("checkpoint truncated at byte {0}")]
    Truncated(usize),
    #[error("malformed checkpoint: {0}")]
    Malformed(String),
}

/// One named array in row-major order.
#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub name: String,
    pub array: ArrayD<f64>,
}

impl Entry {
    pub fn new(name: impl Into<String>, array: ArrayD<f64>) -> Self {
        Self { name: name.into(), array }
    }
}

pub fn encode(entries: &[Entry]) -> Result<Vec<u8>, CheckpointError> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    let count = u32::try_from(entries.len()).map_err(|_| CheckpointError::Malformed("too many entries".into()))?;
    out.extend_from_slice(&count.to_le_bytes());
    for e in entries {
        let name = e.name.as_bytes();
        let len = u16::try_from(name.len()).map_err(|_| CheckpointError::Malformed(format!("name '{}' too long", e.name)))?;
        let rank = u8::try_from(e.array.ndim()).map_err(|_| CheckpointError::Malformed(format!("rank of '{}' too high", e.name)))?;
        out.extend_from_slice(&len.to_le_bytes());
        out.extend_from_slice(name);
        out.push(rank);
        for &d in e.array.shape() {
            out.extend_from_slice(&(d as u64).to_le_bytes());
        }
        for &v in e.array.iter() {
            out.extend_from_slice(&v.to_le_bytes());
        }
    }
    Ok(out)
}

struct Reader<'a> {
    bytes: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], CheckpointError> {
        let end = self.pos.checked_add(n).filter(|&e| e <= self.bytes.len()).ok_or(CheckpointError::Truncated(self.bytes.len()))?;
        let s = &self.bytes[self.pos..end];
        self.pos = end;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], CheckpointError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn decode(bytes: &[u8]) -> Result<Vec<Entry>, CheckpointError> {
    let mut r = Reader { bytes, pos: 0 };
    let magic: [u8; 4] = r.array()?;
    if &magic != MAGIC {
        return Err(CheckpointError::BadMagic(magic));
    }
    let version = u32::from_le_bytes(r.array()?);
    if version != VERSION {
        return Err(CheckpointError::Version(version));
    }
    let count = u32::from_le_bytes(r.array()?) as usize;
    let mut entries = Vec::with_capacity(count.min(1024));
    for _ in 0..count {
        let len = u16::from_le_bytes(r.array()?) as usize;
        let name = std::str::from_utf8(r.take(len)?)
            .map_err(|_| CheckpointError::Malformed("entry name is not UTF-8".into()))?
            .to_string();
        let rank = r.array::<1>()?[0] as usize;
        let mut shape = Vec::with_capacity(rank);
        for _ in 0..rank {
            let d = u64::from_le_bytes(r.array()?);
            shape.push(usize::try_from(d).map_err(|_| CheckpointError::Malformed(format!("dimension {d} of '{name}'")))?);
        }
        let n = shape
            .iter()
            .try_fold(1usize, |acc, &d| acc.checked_mul(d))
            .ok_or_else(|| CheckpointError::Malformed(format!("'{name}' is too large")))?;
        let raw = r.take(n.checked_mul(8).ok_or(CheckpointError::Truncated(bytes.len()))?)?;
        let data: Vec<f64> = raw.chunks_exact(8).map(|c| f64::from_le_bytes(c.try_into().expect("8 bytes"))).collect();
        let array = ArrayD::from_shape_vec(IxDyn(&shape), data).map_err(|e| CheckpointError::Malformed(e.to_string()))?;
        entries.push(Entry { name, array });
    }
    if r.pos != bytes.len() {
        return Err(CheckpointError::Malformed(format!("{} trailing bytes", bytes.len() - r.pos)));
    }
    Ok(entries)
}

pub fn write_checkpoint(path: &Path, entries: &[Entry]) -> Result<(), CheckpointError> {
    fs::write(path, encode(entries)?)?;
    Ok(())
}

pub fn read_checkpoint(path: &Path) -> Result<Vec<Entry>, CheckpointError> {
    decode(&fs::read(path)?)
}

fn named<P: Parameters<f64>>(prefix: &str, names: &[String], p: &P) -> Vec<Entry> {
    names.iter().zip(p.tensors()).map(|(n, t)| Entry::new(format!("{prefix}.{n}"), t.to_owned())).collect()
}

pub fn encoder_entries(enc: &Encoder<f64>) -> Vec<Entry> {
    named("encoder", &["w1", "b1", "w2", "b2"].map(String::from), enc)
}

pub fn head_entries(head: &ClassifierHead<f64>) -> Vec<Entry> {
    named("head", &["w", "b"].map(String::from), head)
}

pub fn generator_entries(g: &StyleGenerator<f64>) -> Vec<Entry> {
    let names: Vec<String> = (0..g.n_cameras()).flat_map(|c| [format!("u{c}"), format!("v{c}")]).collect();
    named("generator", &names, g)
}

fn find<'a>(entries: &'a [Entry], name: &str) -> Result<&'a ArrayD<f64>, CheckpointError> {
    entries
        .iter()
        .find(|e| e.name == name)
        .map(|e| &e.array)
        .ok_or_else(|| CheckpointError::Malformed(format!("missing entry '{name}'")))
}

fn matrix(entries: &[Entry], name: &str) -> Result<Array2<f64>, CheckpointError> {
    find(entries, name)?
        .clone()
        .into_dimensionality()
        .map_err(|_| CheckpointError::Malformed(format!("'{name}' is not a matrix")))
}

fn vector(entries: &[Entry], name: &str) -> Result<Array1<f64>, CheckpointError> {
    find(entries, name)?
        .clone()
        .into_dimensionality()
        .map_err(|_| CheckpointError::Malformed(format!("'{name}' is not a vector")))
}

/// Rebuilds the encoder stored under the `encoder.*` entries.
pub fn encoder_from_entries(entries: &[Entry]) -> Result<Encoder<f64>, CheckpointError> {
    let enc = Encoder {
        w1: matrix(entries, "encoder.w1")?,
        b1: vector(entries, "encoder.b1")?,
        w2: matrix(entries, "encoder.w2")?,
        b2: vector(entries, "encoder.b2")?,
    };
    enc.check_shapes().map_err(|e| CheckpointError::Malformed(e.to_string()))?;
    Ok(enc)
}
