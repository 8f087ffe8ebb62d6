//! Low-dimensional facial control signals.

use dyadic_features::layout::{FACE_DIM, HEAD_ROTATION_COLS};
use dyadic_tensor::Matrix;
use serde::{Deserialize, Serialize};

use crate::{ControlError, Result};

/// Width of a facial-action-unit frame.
pub const FAU_DIM: usize = 46;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ControlKind {
    /// Pitch, yaw and roll.
    HeadRotation,
    /// Mean of the eyebrow action units.
    Eyebrows,
    /// Mean of the mouth action units.
    Mouth,
    /// Eye-gaze pitch and yaw.
    Gaze,
}

impl ControlKind {
    pub fn dim(self) -> usize {
        match self {
            Self::HeadRotation => 3,
            Self::Eyebrows | Self::Mouth => 1,
            Self::Gaze => 2,
        }
    }
}

/// Which action units count as eyebrow and mouth units. This is a
/// configuration table rather than ground truth; the defaults follow the
/// usual detector ordering with brows first and the lower face after the
/// eye and cheek units.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FauMapping {
    pub eyebrows: [usize; 3],
    pub mouth: [usize; 20],
}

impl Default for FauMapping {
    fn default() -> Self {
        let mut mouth = [0; 20];
        for (i, m) in mouth.iter_mut().enumerate() {
            *m = 14 + i;
        }
        Self {
            eyebrows: [0, 1, 2],
            mouth,
        }
    }
}

impl FauMapping {
    pub fn validate(&self) -> Result<()> {
        let all: Vec<usize> = self.eyebrows.iter().chain(&self.mouth).copied().collect();
        if let Some(&bad) = all.iter().find(|&&i| i >= FAU_DIM) {
            return Err(ControlError::Param(format!("action unit {bad} outside 0..{FAU_DIM}")));
        }
        let mut sorted = all.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != all.len() {
            return Err(ControlError::Param("eyebrow and mouth units overlap or repeat".into()));
        }
        Ok(())
    }

    /// Averages the mapped units of an `N x 46` action-unit track.
    pub fn signal(&self, kind: ControlKind, fau: &Matrix) -> Result<Matrix> {
        self.validate()?;
        if fau.cols() != FAU_DIM {
            return Err(ControlError::Shape(format!("action units have {} columns, expected {FAU_DIM}", fau.cols())));
        }
        let idx: &[usize] = match kind {
            ControlKind::Eyebrows => &self.eyebrows,
            ControlKind::Mouth => &self.mouth,
            other => return Err(ControlError::Param(format!("{other:?} is not an action-unit signal"))),
        };
        let mut out = Matrix::zeros(fau.rows(), 1);
        for t in 0..fau.rows() {
            let row = fau.row(t);
            out.set(t, 0, idx.iter().map(|&i| row[i]).sum::<f64>() / idx.len() as f64);
        }
        Ok(out)
    }
}

/// The three head-rotation channels of an `N x 137` face track.
pub fn head_rotation(face: &Matrix) -> Result<Matrix> {
    if face.cols() != FACE_DIM {
        return Err(ControlError::Shape(format!("face track has {} columns, expected {FACE_DIM}", face.cols())));
    }
    Ok(face.slice_cols(HEAD_ROTATION_COLS.start, HEAD_ROTATION_COLS.end))
}
