//! Temporal dropping of gesture conditions.

use dyadic_tensor::Matrix;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::{ControlError, Result};

/// A per-frame gesture condition.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub enum GestureCondition {
    /// Body frames; a dropped frame is a zero row.
    Raw(Matrix),
    /// Codebook ids; a dropped frame holds `null_id`.
    Codes { ids: Vec<usize>, null_id: usize },
}

impl GestureCondition {
    pub fn frames(&self) -> usize {
        match self {
            Self::Raw(m) => m.rows(),
            Self::Codes { ids, .. } => ids.len(),
        }
    }

    /// Replaces the frames where `keep` is false with the null value.
    pub fn masked(&self, keep: &[bool]) -> Result<Self> {
        if keep.len() != self.frames() {
            return Err(ControlError::Shape(format!(
                "mask of {} frames for a {}-frame condition",
                keep.len(),
                self.frames()
            )));
        }
        Ok(match self {
            Self::Raw(m) => {
                let mut out = m.clone();
                for (t, &k) in keep.iter().enumerate() {
                    if !k {
                        out.row_mut(t).fill(0.0);
                    }
                }
                Self::Raw(out)
            }
            Self::Codes { ids, null_id } => Self::Codes {
                ids: ids.iter().zip(keep).map(|(&i, &k)| if k { i } else { *null_id }).collect(),
                null_id: *null_id,
            },
        })
    }
}

/// Keeps each frame independently with probability `1 − p_drop`. Returns
/// the dropped condition and the keep mask.
pub fn temporal_gesture_drop<R: Rng + ?Sized>(
    g: &GestureCondition,
    p_drop: f64,
    rng: &mut R,
) -> Result<(GestureCondition, Vec<bool>)> {
    if !(0.0..=1.0).contains(&p_drop) {
        return Err(ControlError::Param(format!("p_drop {p_drop} outside [0, 1]")));
    }
    let keep: Vec<bool> = (0..g.frames()).map(|_| rng.random::<f64>() >= p_drop).collect();
    Ok((g.masked(&keep)?, keep))
}
