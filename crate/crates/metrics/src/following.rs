//! How closely generated motion follows a gesture condition.

use dyadic_features::kinematics::keypoints;
use dyadic_tensor::Matrix;
use serde::{Deserialize, Serialize};

use crate::{MetricError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Space {
    /// Compare the body feature vectors directly.
    SmplParams,
    /// Compare forward-kinematics keypoints.
    Keypoints,
}

/// Mean over frames `t_start..t_end` of the squared L2 distance between
/// generated and ground-truth frames.
pub fn condition_following(gen: &Matrix, gt: &Matrix, t_start: usize, t_end: usize, space: Space) -> Result<f64> {
    if gen.cols() != gt.cols() {
        return Err(MetricError::Shape(format!("widths {} and {}", gen.cols(), gt.cols())));
    }
    if t_start >= t_end {
        return Err(MetricError::Param(format!("empty window {t_start}..{t_end}")));
    }
    if t_end > gen.rows() || t_end > gt.rows() {
        return Err(MetricError::Param(format!(
            "window end {t_end} beyond {} generated / {} reference frames",
            gen.rows(),
            gt.rows()
        )));
    }
    let (a, b) = (gen.slice_rows(t_start, t_end), gt.slice_rows(t_start, t_end));
    let (a, b) = match space {
        Space::SmplParams => (a, b),
        Space::Keypoints => (
            keypoints(&a)?,
            keypoints(&b)?,
        ),
    };
    Ok(a.sub(&b).sum_squares() / (t_end - t_start) as f64)
}
