//! Frame-aligned condition blocks.

use dyadic_features::layout::{BODY_DIM, FACE_DIM, JOINT_DIM};
use dyadic_features::resample::{resample_condition, resample_rows};
use dyadic_features::{SpeechTokenStream, FPS};
use dyadic_tensor::Matrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{ConditionError, Result};

/// Agent speech.
pub const A1: &str = "a1";
/// User speech.
pub const A2: &str = "a2";
/// User visual features.
pub const V2: &str = "v2";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Mode {
    Monadic,
    Dyadic,
    #[serde(rename = "av")]
    AvDyadic,
}

impl Mode {
    pub fn label(self) -> &'static str {
        match self {
            Self::Monadic => "monadic",
            Self::Dyadic => "dyadic",
            Self::AvDyadic => "av",
        }
    }
}

impl std::str::FromStr for Mode {
    type Err = ConditionError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "monadic" => Ok(Self::Monadic),
            "dyadic" => Ok(Self::Dyadic),
            "av" | "av_dyadic" => Ok(Self::AvDyadic),
            other => Err(ConditionError::Config(format!("unknown mode {other:?}"))),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum BlockValue {
    /// Speech tokens at the motion frame rate.
    Tokens(Vec<u32>),
    /// One feature row per frame.
    Continuous(Matrix),
    /// One class index per frame.
    Categorical(Vec<usize>),
}

impl BlockValue {
    pub fn frames(&self) -> usize {
        match self {
            Self::Tokens(t) => t.len(),
            Self::Continuous(m) => m.rows(),
            Self::Categorical(c) => c.len(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Block {
    pub name: String,
    pub value: BlockValue,
    /// Replaced by the block's null embedding when true.
    pub dropped: bool,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ConditionBundle {
    frames: usize,
    blocks: Vec<Block>,
}

impl ConditionBundle {
    pub fn new(frames: usize) -> Self {
        Self {
            frames,
            blocks: Vec::new(),
        }
    }

    /// Frame-rate speech for each channel plus an optional user visual
    /// stream, checked against what `mode` requires.
    pub fn from_frames(
        mode: Mode,
        a1: Vec<u32>,
        a2: Option<Vec<u32>>,
        v2: Option<Matrix>,
    ) -> Result<Self> {
        let mut b = Self::new(a1.len());
        b.push(A1, BlockValue::Tokens(a1))?;
        if matches!(mode, Mode::Dyadic | Mode::AvDyadic) {
            let a2 = a2.ok_or_else(|| ConditionError::Config(format!("{} mode needs user speech (A2)", mode.label())))?;
            b.push(A2, BlockValue::Tokens(a2))?;
        }
        if mode == Mode::AvDyadic {
            let v2 = v2.ok_or_else(|| ConditionError::Config("av mode needs user visual features (V2)".into()))?;
            b.push(V2, BlockValue::Continuous(v2))?;
        }
        Ok(b)
    }

    pub fn frames(&self) -> usize {
        self.frames
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn blocks_mut(&mut self) -> &mut [Block] {
        &mut self.blocks
    }

    pub fn names(&self) -> Vec<&str> {
        self.blocks.iter().map(|b| b.name.as_str()).collect()
    }

    pub fn get(&self, name: &str) -> Option<&Block> {
        self.blocks.iter().find(|b| b.name == name)
    }

    pub fn get_mut(&mut self, name: &str) -> Option<&mut Block> {
        self.blocks.iter_mut().find(|b| b.name == name)
    }

    /// Appends a block; its length must equal the bundle's frame count and
    /// its name must be new.
    pub fn push(&mut self, name: &str, value: BlockValue) -> Result<()> {
        if value.frames() != self.frames {
            return Err(ConditionError::Shape(format!(
                "block {name} has {} frames, bundle has {}",
                value.frames(),
                self.frames
            )));
        }
        if self.get(name).is_some() {
            return Err(ConditionError::Config(format!("duplicate block {name}")));
        }
        self.blocks.push(Block {
            name: name.to_string(),
            value,
            dropped: false,
        });
        Ok(())
    }

    pub fn dropout_mask(&self) -> Vec<bool> {
        self.blocks.iter().map(|b| b.dropped).collect()
    }

    /// A copy with every block dropped.
    pub fn all_dropped(&self) -> Self {
        let mut out = self.clone();
        for b in &mut out.blocks {
            b.dropped = true;
        }
        out
    }
}

/// Resamples speech from the token rate (and visual features at the
/// motion rate) to `n` frames and assembles the blocks `mode` requires.
pub fn build_condition(
    a1: &SpeechTokenStream,
    a2: Option<&SpeechTokenStream>,
    v2: Option<&Matrix>,
    mode: Mode,
    n: usize,
) -> Result<ConditionBundle> {
    let a1f = resample_condition(a1.tokens(), n)?;
    let a2f = a2.map(|s| resample_condition(s.tokens(), n)).transpose()?;
    let v2f = v2.map(|m| resample_rows(m, FPS, FPS, n)).transpose()?;
    ConditionBundle::from_frames(mode, a1f, a2f, v2f)
}

/// Drops each block independently with probability `rho`.
pub fn condition_dropout<R: Rng + ?Sized>(bundle: &ConditionBundle, rho: f64, rng: &mut R) -> Result<ConditionBundle> {
    if !(0.0..=1.0).contains(&rho) {
        return Err(ConditionError::Config(format!("dropout rate {rho} outside [0, 1]")));
    }
    let mut out = bundle.clone();
    for b in &mut out.blocks {
        b.dropped = rng.random::<f64>() < rho;
    }
    Ok(out)
}

/// `N x 137` face and `N x 258` body into the `N x 395` joint stream.
pub fn joint_concat(face: &Matrix, body: &Matrix) -> Result<Matrix> {
    if face.cols() != FACE_DIM || body.cols() != BODY_DIM {
        return Err(ConditionError::Shape(format!(
            "face {} and body {} columns, expected {FACE_DIM} and {BODY_DIM}",
            face.cols(),
            body.cols()
        )));
    }
    if face.rows() != body.rows() {
        return Err(ConditionError::Shape(format!("{} face frames vs {} body frames", face.rows(), body.rows())));
    }
    Ok(Matrix::concat_cols(&[face, body]))
}

pub fn joint_split(joint: &Matrix) -> Result<(Matrix, Matrix)> {
    if joint.cols() != JOINT_DIM {
        return Err(ConditionError::Shape(format!("joint has {} columns, expected {JOINT_DIM}", joint.cols())));
    }
    Ok((joint.slice_cols(0, FACE_DIM), joint.slice_cols(FACE_DIM, JOINT_DIM)))
}
