//! Single-file tensor container.
//!
//! Layout: the magic line `DYADIC-CKPT 1`, one line of JSON header, then the
//! tensor payloads back to back as little-endian, C-order `f64`. The header
//! echoes the producing configuration and indexes every tensor by name,
//! shape and byte offset into the payload section.

use std::fs;
use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::{Matrix, ParamStore};

const MAGIC: &str = "DYADIC-CKPT 1";

#[derive(Debug, thiserror::Error)]
pub enum CheckpointError {
    #[error("checkpoint i/o: {0}")]
    Io(#[from] std::io::Error),
    #[error("checkpoint header: {0}")]
    Header(#[from] serde_json::Error),
    #[error("not a checkpoint file (bad magic line)")]
    BadMagic,
    #[error("tensor `{name}`: {reason}")]
    Tensor { name: String, reason: String },
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct TensorEntry {
    pub name: String,
    pub shape: [usize; 2],
    pub dtype: String,
    pub offset: u64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct Header {
    config: serde_json::Value,
    tensors: Vec<TensorEntry>,
}

pub fn save(
    path: impl AsRef<Path>,
    config: &serde_json::Value,
    store: &ParamStore,
) -> Result<(), CheckpointError> {
    let mut offset = 0u64;
    let mut tensors = Vec::with_capacity(store.len());
    for (_, name, m) in store.iter() {
        tensors.push(TensorEntry {
            name: name.to_string(),
            shape: [m.rows(), m.cols()],
            dtype: "f64".into(),
            offset,
        });
        offset += (m.len() * 8) as u64;
    }
    let header = Header {
        config: config.clone(),
        tensors,
    };
    let mut buf = Vec::with_capacity(offset as usize + 1024);
    writeln!(buf, "{MAGIC}")?;
    serde_json::to_writer(&mut buf, &header)?;
    buf.push(b'\n');
    for (_, _, m) in store.iter() {
        for v in m.data() {
            buf.extend_from_slice(&v.to_le_bytes());
        }
    }
    fs::write(path, buf)?;
    Ok(())
}

/// Loads a checkpoint into a fresh store (tensors in file order) and returns
/// the echoed configuration.
pub fn load(path: impl AsRef<Path>) -> Result<(serde_json::Value, ParamStore), CheckpointError> {
    let mut reader = BufReader::new(fs::File::open(path)?);
    let mut line = String::new();
    reader.read_line(&mut line)?;
    if line.trim_end() != MAGIC {
        return Err(CheckpointError::BadMagic);
    }
    line.clear();
    reader.read_line(&mut line)?;
    let header: Header = serde_json::from_str(line.trim_end())?;
    let mut payload = Vec::new();
    reader.read_to_end(&mut payload)?;
    let mut store = ParamStore::new();
    for t in &header.tensors {
        if t.dtype != "f64" {
            return Err(CheckpointError::Tensor {
                name: t.name.clone(),
                reason: format!("unsupported dtype {}", t.dtype),
            });
        }
        let n = t.shape[0] * t.shape[1];
        let start = t.offset as usize;
        let end = start + n * 8;
        let bytes = payload.get(start..end).ok_or_else(|| CheckpointError::Tensor {
            name: t.name.clone(),
            reason: "payload truncated".into(),
        })?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().expect("8-byte chunk")))
            .collect();
        store.add(t.name.clone(), Matrix::from_vec(t.shape[0], t.shape[1], data));
    }
    Ok((header.config, store))
}

/// Copies tensors from `src` into `dst` by name, checking shapes.
pub fn restore_into(dst: &mut ParamStore, src: &ParamStore) -> Result<(), CheckpointError> {
    for id in dst.ids().collect::<Vec<_>>() {
        let name = dst.name(id).to_string();
        let sid = src.id(&name).ok_or_else(|| CheckpointError::Tensor {
            name: name.clone(),
            reason: "missing from checkpoint".into(),
        })?;
        let value = src.get(sid);
        if value.shape() != dst.get(id).shape() {
            return Err(CheckpointError::Tensor {
                name,
                reason: format!(
                    "shape {:?} does not match model {:?}",
                    value.shape(),
                    dst.get(id).shape()
                ),
            });
        }
        *dst.get_mut(id) = value.clone();
    }
    Ok(())
}
