//! Binary template store.
//!
//! Layout, all integers little-endian:
//!
//! | field        | type                     |
//! |--------------|--------------------------|
//! | magic        | `b"FSTB"`                |
//! | version      | u16 (currently 1)        |
//! | record count | u64                      |
//!
//! then per record: subject id as u32 byte length plus UTF-8 bytes, modality
//! tag u8 (0 face, 1 gait, 2 body), dim u32, and `dim` IEEE-754 f64 values.

use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::model::{Modality, ModalityDims, Template};

pub const MAGIC: [u8; 4] = *b"FSTB";
pub const VERSION: u16 = 1;
pub const HEADER_BYTES: usize = 4 + 2 + 8;

#[derive(Debug, Error)]
pub enum StoreError {
    #[error("I/O error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("bad magic {found:?} at offset {offset}")]
    BadMagic { offset: usize, found: Vec<u8> },
    #[error("unsupported store version {version} at offset {offset}")]
    UnsupportedVersion { offset: usize, version: u16 },
    #[error("file truncated at offset {offset}: needed {needed} bytes, {available} available")]
    TruncatedFile {
        offset: usize,
        needed: usize,
        available: usize,
    },
    #[error("unknown modality tag {tag} at offset {offset}")]
    BadModalityTag { offset: usize, tag: u8 },
    #[error("subject id at offset {offset} is not valid UTF-8")]
    BadUtf8 { offset: usize },
    #[error("non-finite value at offset {offset}")]
    NonFinite { offset: usize },
    #[error("{trailing} unexpected trailing bytes at offset {offset}")]
    TrailingBytes { offset: usize, trailing: usize },
    #[error("{subject_id}/{modality}: dim {dim} but the modality is configured for {expected}")]
    DimMismatchWithModalityConfig {
        subject_id: String,
        modality: Modality,
        dim: usize,
        expected: usize,
    },
    #[error("field too large to encode: {0}")]
    TooLarge(&'static str),
}

/// Serializes templates, checking each against the configured modality dims.
pub fn encode(entries: &[Template], dims: &ModalityDims) -> Result<Vec<u8>, StoreError> {
    let mut size = HEADER_BYTES;
    for t in entries {
        let expected = dims.get(t.modality());
        if t.dim() != expected {
            return Err(StoreError::DimMismatchWithModalityConfig {
                subject_id: t.subject_id().to_string(),
                modality: t.modality(),
                dim: t.dim(),
                expected,
            });
        }
        size += 4 + t.subject_id().len() + 1 + 4 + t.payload_bytes();
    }
    let mut out = Vec::with_capacity(size);
    out.extend_from_slice(&MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&(entries.len() as u64).to_le_bytes());
    for t in entries {
        let id = t.subject_id().as_bytes();
        let id_len = u32::try_from(id.len()).map_err(|_| StoreError::TooLarge("subject id"))?;
        let dim = u32::try_from(t.dim()).map_err(|_| StoreError::TooLarge("dim"))?;
        out.extend_from_slice(&id_len.to_le_bytes());
        out.extend_from_slice(id);
        out.push(t.modality().tag());
        out.extend_from_slice(&dim.to_le_bytes());
        let start = out.len();
        for v in t.vector() {
            out.extend_from_slice(&v.to_le_bytes());
        }
        debug_assert_eq!(out.len() - start, t.payload_bytes());
    }
    debug_assert_eq!(out.len(), size);
    Ok(out)
}

struct Cursor<'a> {
    buf: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], StoreError> {
        let available = self.buf.len() - self.pos;
        if n > available {
            return Err(StoreError::TruncatedFile {
                offset: self.pos,
                needed: n,
                available,
            });
        }
        let s = &self.buf[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn array<const N: usize>(&mut self) -> Result<[u8; N], StoreError> {
        Ok(self.take(N)?.try_into().expect("length checked"))
    }
}

pub fn decode(buf: &[u8]) -> Result<Vec<Template>, StoreError> {
    let mut c = Cursor { buf, pos: 0 };
    // a cut-off magic is a truncation; anything else short is not our file
    let magic = c.take(4).map_err(|e| {
        if MAGIC.starts_with(buf) {
            e
        } else {
            StoreError::BadMagic {
                offset: 0,
                found: buf.to_vec(),
            }
        }
    })?;
    if magic != MAGIC {
        return Err(StoreError::BadMagic {
            offset: 0,
            found: magic.to_vec(),
        });
    }
    let version = u16::from_le_bytes(c.array()?);
    if version != VERSION {
        return Err(StoreError::UnsupportedVersion { offset: 4, version });
    }
    let count = u64::from_le_bytes(c.array()?);
    let mut out = Vec::new();
    for _ in 0..count {
        let id_len = u32::from_le_bytes(c.array()?) as usize;
        let id_at = c.pos;
        let id = std::str::from_utf8(c.take(id_len)?)
            .map_err(|_| StoreError::BadUtf8 { offset: id_at })?;
        let tag_at = c.pos;
        let [tag] = c.array::<1>()?;
        let modality =
            Modality::from_tag(tag).ok_or(StoreError::BadModalityTag { offset: tag_at, tag })?;
        let dim = u32::from_le_bytes(c.array()?) as usize;
        let vec_at = c.pos;
        let bytes = c.take(dim.checked_mul(8).ok_or(StoreError::TooLarge("dim"))?)?;
        let vector: Vec<f64> = bytes
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().expect("chunk of 8")))
            .collect();
        let t = Template::new(id, modality, vector).map_err(|_| {
            let i = bytes
                .chunks_exact(8)
                .position(|b| !f64::from_le_bytes(b.try_into().expect("chunk of 8")).is_finite())
                .unwrap_or(0);
            StoreError::NonFinite {
                offset: vec_at + 8 * i,
            }
        })?;
        out.push(t);
    }
    if c.pos != buf.len() {
        return Err(StoreError::TrailingBytes {
            offset: c.pos,
            trailing: buf.len() - c.pos,
        });
    }
    Ok(out)
}

/// Writes the store file and returns its size in bytes.
pub fn store_write(
    entries: &[Template],
    path: impl AsRef<Path>,
    dims: &ModalityDims,
) -> Result<u64, StoreError> {
    let path = path.as_ref();
    let bytes = encode(entries, dims)?;
    std::fs::write(path, &bytes).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(bytes.len() as u64)
}

pub fn store_read(path: impl AsRef<Path>) -> Result<Vec<Template>, StoreError> {
    let path = path.as_ref();
    let bytes = std::fs::read(path).map_err(|source| StoreError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    decode(&bytes)
}
