//! Binary feature files: raw little-endian `f32` (features) or `i32`
//! (speech tokens) in C order, each with a JSON sidecar at `<file>.json`
//! describing shape, rate and channel.

use std::path::{Path, PathBuf};

use dyadic_tensor::Matrix;
use serde::{Deserialize, Serialize};

use crate::records::InteractionRecord;
use crate::{CorpusError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Channel {
    Face,
    Body,
    Joint,
    SpeechA,
    SpeechB,
    /// Arousal and valence, two columns in [-1, 1].
    Av,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Dtype {
    F32,
    I32,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Descriptor {
    pub shape: [usize; 2],
    pub fps: f64,
    pub channel: Channel,
    pub dtype: Dtype,
}

fn sidecar(path: &Path) -> PathBuf {
    let mut s = path.as_os_str().to_owned();
    s.push(".json");
    PathBuf::from(s)
}

fn write_sidecar(path: &Path, d: &Descriptor) -> Result<()> {
    let text = serde_json::to_string_pretty(d).expect("descriptor serialises");
    std::fs::write(sidecar(path), text).map_err(|e| CorpusError::io(path, e))
}

pub fn read_descriptor(path: &Path) -> Result<Descriptor> {
    let side = sidecar(path);
    let text = std::fs::read_to_string(&side).map_err(|e| CorpusError::io(&side, e))?;
    serde_json::from_str(&text).map_err(|e| CorpusError::Schema(format!("{}: {e}", side.display())))
}

pub fn write_features(path: &Path, m: &Matrix, channel: Channel, fps: f64) -> Result<()> {
    let bytes: Vec<u8> = m
        .data()
        .iter()
        .flat_map(|&v| (v as f32).to_le_bytes())
        .collect();
    std::fs::write(path, bytes).map_err(|e| CorpusError::io(path, e))?;
    write_sidecar(
        path,
        &Descriptor {
            shape: [m.rows(), m.cols()],
            fps,
            channel,
            dtype: Dtype::F32,
        },
    )
}

fn read_payload(path: &Path, d: &Descriptor, want: Dtype) -> Result<Vec<[u8; 4]>> {
    if d.dtype != want {
        return Err(CorpusError::Schema(format!(
            "{} holds {:?}, expected {want:?}",
            path.display(),
            d.dtype
        )));
    }
    let bytes = std::fs::read(path).map_err(|e| CorpusError::io(path, e))?;
    let expected = d.shape[0] * d.shape[1] * 4;
    if bytes.len() != expected {
        return Err(CorpusError::Schema(format!(
            "{} has {} bytes, descriptor implies {expected}",
            path.display(),
            bytes.len()
        )));
    }
    Ok(bytes
        .chunks_exact(4)
        .map(|c| [c[0], c[1], c[2], c[3]])
        .collect())
}

pub fn read_features(path: &Path) -> Result<(Descriptor, Matrix)> {
    let d = read_descriptor(path)?;
    let data = read_payload(path, &d, Dtype::F32)?
        .into_iter()
        .map(|b| f64::from(f32::from_le_bytes(b)))
        .collect();
    let m = Matrix::from_vec(d.shape[0], d.shape[1], data);
    Ok((d, m))
}

pub fn write_tokens(path: &Path, tokens: &[u32], channel: Channel, rate: f64) -> Result<()> {
    let bytes: Vec<u8> = tokens
        .iter()
        .flat_map(|&t| (t as i32).to_le_bytes())
        .collect();
    std::fs::write(path, bytes).map_err(|e| CorpusError::io(path, e))?;
    write_sidecar(
        path,
        &Descriptor {
            shape: [tokens.len(), 1],
            fps: rate,
            channel,
            dtype: Dtype::I32,
        },
    )
}

pub fn read_tokens(path: &Path) -> Result<(Descriptor, Vec<u32>)> {
    let d = read_descriptor(path)?;
    let tokens = read_payload(path, &d, Dtype::I32)?
        .into_iter()
        .map(|b| {
            let v = i32::from_le_bytes(b);
            u32::try_from(v).map_err(|_| {
                CorpusError::Schema(format!("{}: negative token {v}", path.display()))
            })
        })
        .collect::<Result<_>>()?;
    Ok((d, tokens))
}

/// All streams of one interaction. Index 0 is participant A, 1 is B.
#[derive(Clone, Debug, PartialEq)]
pub struct Streams {
    pub speech: [Vec<u32>; 2],
    pub face: [Matrix; 2],
    pub body: [Matrix; 2],
    pub av: Option<[Matrix; 2]>,
}

impl Streams {
    pub fn frames(&self) -> usize {
        self.face[0].rows()
    }
}

/// Keys used in `feature_refs` for each stream.
pub const REF_KEYS: [(&str, &str); 4] = [
    ("speech_a", "speech_b"),
    ("face_a", "face_b"),
    ("body_a", "body_b"),
    ("av_a", "av_b"),
];

/// Loads the streams an interaction references, resolving relative paths
/// against `root`.
pub fn load_streams(root: &Path, r: &InteractionRecord) -> Result<Streams> {
    let path = |key: &str| -> Result<PathBuf> {
        r.feature_refs
            .get(key)
            .map(|p| root.join(p))
            .ok_or_else(|| {
                CorpusError::Schema(format!(
                    "interaction {} has no feature_refs entry {key:?}",
                    r.interaction_id
                ))
            })
    };
    let tokens = |key: &str| -> Result<Vec<u32>> { Ok(read_tokens(&path(key)?)?.1) };
    let feats = |key: &str| -> Result<Matrix> { Ok(read_features(&path(key)?)?.1) };
    let av = if r.feature_refs.contains_key("av_a") {
        Some([feats("av_a")?, feats("av_b")?])
    } else {
        None
    };
    Ok(Streams {
        speech: [tokens("speech_a")?, tokens("speech_b")?],
        face: [feats("face_a")?, feats("face_b")?],
        body: [feats("body_a")?, feats("body_b")?],
        av,
    })
}
