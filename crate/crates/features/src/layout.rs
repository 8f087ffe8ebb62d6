//! Channel layouts of the face, body and speech streams.

use dyadic_tensor::Matrix;
use serde::{Deserialize, Serialize};

use crate::rotation::{self, Rot};
use crate::{FeatureError, Result};

pub const EXPRESSION_DIM: usize = 128;
pub const HEAD_ROTATION_DIM: usize = 3;
pub const TRANSLATION_DIM: usize = 6;
pub const FACE_DIM: usize = EXPRESSION_DIM + HEAD_ROTATION_DIM + TRANSLATION_DIM;
/// Columns of the head rotation (pitch, yaw, roll) inside a face frame.
pub const HEAD_ROTATION_COLS: std::ops::Range<usize> =
    EXPRESSION_DIM..EXPRESSION_DIM + HEAD_ROTATION_DIM;

pub const BODY_JOINT_COUNT: usize = 43;
pub const BODY_DIM: usize = BODY_JOINT_COUNT * 6;
pub const JOINT_DIM: usize = FACE_DIM + BODY_DIM;

/// SMPL-H joint names in model order (22 body joints then 15 per hand).
pub const SMPLH_JOINT_NAMES: [&str; 52] = [
    "pelvis", "left_hip", "right_hip", "spine1", "left_knee", "right_knee", "spine2",
    "left_ankle", "right_ankle", "spine3", "left_foot", "right_foot", "neck",
    "left_collar", "right_collar", "head", "left_shoulder", "right_shoulder",
    "left_elbow", "right_elbow", "left_wrist", "right_wrist",
    "left_index1", "left_index2", "left_index3", "left_middle1", "left_middle2",
    "left_middle3", "left_pinky1", "left_pinky2", "left_pinky3", "left_ring1",
    "left_ring2", "left_ring3", "left_thumb1", "left_thumb2", "left_thumb3",
    "right_index1", "right_index2", "right_index3", "right_middle1", "right_middle2",
    "right_middle3", "right_pinky1", "right_pinky2", "right_pinky3", "right_ring1",
    "right_ring2", "right_ring3", "right_thumb1", "right_thumb2", "right_thumb3",
];

/// Hips, knees, ankles and feet. These are dropped from the body stream.
pub const LEG_JOINTS: [usize; 8] = [1, 2, 4, 5, 7, 8, 10, 11];

/// SMPL-H indices of the 43 joints kept in a body frame, in channel order.
/// The root orientation is not part of the pose and is not encoded.
pub const BODY_JOINTS: [usize; BODY_JOINT_COUNT] = [
    3, 6, 9, 12, 13, 14, 15, 16, 17, 18, 19, 20, 21, 22, 23, 24, 25, 26, 27, 28, 29, 30,
    31, 32, 33, 34, 35, 36, 37, 38, 39, 40, 41, 42, 43, 44, 45, 46, 47, 48, 49, 50, 51,
];

fn check_width(m: &Matrix, width: usize, what: &str) -> Result<()> {
    if m.cols() != width {
        return Err(FeatureError::Shape {
            expected: format!("{what} width {width}"),
            got: format!("{}x{}", m.rows(), m.cols()),
        });
    }
    if !m.is_finite() {
        return Err(FeatureError::NonFinite("feature matrix"));
    }
    Ok(())
}

/// Per-frame facial motion: expression code, head rotation, translations.
#[derive(Clone, Debug, PartialEq)]
pub struct FaceFeatures {
    expression: Matrix,
    head_rotation: Matrix,
    translations: Matrix,
}

impl FaceFeatures {
    pub fn new(expression: Matrix, head_rotation: Matrix, translations: Matrix) -> Result<Self> {
        check_width(&expression, EXPRESSION_DIM, "expression")?;
        check_width(&head_rotation, HEAD_ROTATION_DIM, "head rotation")?;
        check_width(&translations, TRANSLATION_DIM, "translation")?;
        let n = expression.rows();
        if head_rotation.rows() != n || translations.rows() != n {
            return Err(FeatureError::Shape {
                expected: format!("{n} frames in every face block"),
                got: format!("{} and {}", head_rotation.rows(), translations.rows()),
            });
        }
        Ok(Self {
            expression,
            head_rotation,
            translations,
        })
    }

    pub fn from_assembled(m: &Matrix) -> Result<Self> {
        check_width(m, FACE_DIM, "face")?;
        Self::new(
            m.slice_cols(0, EXPRESSION_DIM),
            m.slice_cols(HEAD_ROTATION_COLS.start, HEAD_ROTATION_COLS.end),
            m.slice_cols(HEAD_ROTATION_COLS.end, FACE_DIM),
        )
    }

    pub fn frames(&self) -> usize {
        self.expression.rows()
    }

    pub fn expression(&self) -> &Matrix {
        &self.expression
    }

    pub fn head_rotation(&self) -> &Matrix {
        &self.head_rotation
    }

    pub fn translations(&self) -> &Matrix {
        &self.translations
    }

    pub fn assembled(&self) -> Matrix {
        Matrix::concat_cols(&[&self.expression, &self.head_rotation, &self.translations])
    }
}

/// Per-frame body pose: 43 joint rotations in the 6D encoding.
#[derive(Clone, Debug, PartialEq)]
pub struct BodyFeatures {
    assembled: Matrix,
}

impl BodyFeatures {
    pub fn from_assembled(m: Matrix) -> Result<Self> {
        check_width(&m, BODY_DIM, "body")?;
        Ok(Self { assembled: m })
    }

    /// Encodes per-frame joint rotations (43 per frame, channel order).
    pub fn from_rotations(frames: &[Vec<Rot>]) -> Result<Self> {
        let mut data = Vec::with_capacity(frames.len() * BODY_DIM);
        for f in frames {
            if f.len() != BODY_JOINT_COUNT {
                return Err(FeatureError::Shape {
                    expected: format!("{BODY_JOINT_COUNT} joints"),
                    got: format!("{} joints", f.len()),
                });
            }
            for r in f {
                data.extend_from_slice(&rotation::to_6d(r));
            }
        }
        Self::from_assembled(Matrix::from_vec(frames.len(), BODY_DIM, data))
    }

    pub fn frames(&self) -> usize {
        self.assembled.rows()
    }

    pub fn assembled(&self) -> &Matrix {
        &self.assembled
    }

    /// Decodes the joint rotations of one frame.
    pub fn rotations(&self, frame: usize) -> Result<Vec<Rot>> {
        self.assembled
            .row(frame)
            .chunks(6)
            .map(rotation::from_6d)
            .collect()
    }
}

/// Discrete speech tokens at 12.5 Hz.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SpeechTokenStream {
    tokens: Vec<u32>,
    vocab_size: u32,
}

impl SpeechTokenStream {
    pub fn new(tokens: Vec<u32>, vocab_size: u32) -> Result<Self> {
        if let Some(&token) = tokens.iter().find(|&&t| t >= vocab_size) {
            return Err(FeatureError::Token {
                token,
                vocab: vocab_size,
            });
        }
        Ok(Self { tokens, vocab_size })
    }

    pub fn tokens(&self) -> &[u32] {
        &self.tokens
    }

    pub fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    pub fn len(&self) -> usize {
        self.tokens.len()
    }

    pub fn is_empty(&self) -> bool {
        self.tokens.is_empty()
    }
}
