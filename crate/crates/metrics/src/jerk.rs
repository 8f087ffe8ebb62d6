//! Jerk of keypoint trajectories and the boundary smoothness score.
//!
//! Jerk uses the forward third difference
//! `(x_{t+3} − 3x_{t+2} + 3x_{t+1} − x_t) / Δt³`, which is exact on cubics.

use dyadic_tensor::Matrix;

use crate::{MetricError, Result};

/// Jerk scale of the exponential map from mean jerk to smoothness.
pub const DEFAULT_SIGMA: f64 = 100.0;
/// Frames around each boundary: half before, half after.
pub const DEFAULT_WINDOW: usize = 30;

/// `T` frames of `K` keypoints, stored as `T x 3K` (x, y, z per keypoint).
#[derive(Clone, Debug, PartialEq)]
pub struct KeypointTrack {
    pub positions: Matrix,
    pub fps: f64,
}

impl KeypointTrack {
    pub fn new(positions: Matrix, fps: f64) -> Result<Self> {
        if positions.cols() % 3 != 0 || positions.cols() == 0 {
            return Err(MetricError::Shape(format!(
                "{} columns is not a whole number of 3-d keypoints",
                positions.cols()
            )));
        }
        if !(fps > 0.0) {
            return Err(MetricError::Param(format!("fps {fps} must be positive")));
        }
        Ok(Self { positions, fps })
    }

    pub fn frames(&self) -> usize {
        self.positions.rows()
    }

    pub fn keypoints(&self) -> usize {
        self.positions.cols() / 3
    }

    fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            positions: self.positions.slice_rows(start, end),
            fps: self.fps,
        }
    }
}

/// Per-frame, per-keypoint jerk magnitude, `(T − 3) x K`.
pub fn jerk(track: &KeypointTrack) -> Result<Matrix> {
    if !(track.fps > 0.0) {
        return Err(MetricError::Param(format!("fps {} must be positive", track.fps)));
    }
    let t = track.frames();
    if t < 4 {
        return Err(MetricError::Param(format!("jerk needs at least 4 frames, got {t}")));
    }
    let p = &track.positions;
    let k = track.keypoints();
    let inv = track.fps.powi(3);
    let mut out = Matrix::zeros(t - 3, k);
    for i in 0..t - 3 {
        for j in 0..k {
            let mut sq = 0.0;
            for a in 0..3 {
                let c = 3 * j + a;
                let d3 = p.get(i + 3, c) - 3.0 * p.get(i + 2, c) + 3.0 * p.get(i + 1, c) - p.get(i, c);
                sq += (d3 * inv).powi(2);
            }
            out.set(i, j, sq.sqrt());
        }
    }
    Ok(out)
}

/// Mean jerk magnitude over valid frames and keypoints.
pub fn mean_jerk(track: &KeypointTrack) -> Result<f64> {
    Ok(jerk(track)?.mean())
}

/// Mean over boundaries of `exp(−J̄_w / σ)`, where `J̄_w` is the mean jerk
/// in the `window` frames centred on the boundary.
pub fn boundary_smoothness(track: &KeypointTrack, boundaries: &[usize], sigma: f64, window: usize) -> Result<f64> {
    if boundaries.is_empty() {
        return Err(MetricError::Param("no boundaries".into()));
    }
    if !(sigma > 0.0) {
        return Err(MetricError::Param(format!("sigma {sigma} must be positive")));
    }
    if window < 4 {
        return Err(MetricError::Param(format!("window {window} shorter than the jerk stencil")));
    }
    let before = window / 2;
    let after = window - before;
    let mut total = 0.0;
    for &b in boundaries {
        if b < before || b + after > track.frames() {
            return Err(MetricError::Margin {
                boundary: b,
                margin: before.max(after),
                frames: track.frames(),
            });
        }
        let j = mean_jerk(&track.slice(b - before, b + after))?;
        total += (-j / sigma).exp();
    }
    Ok(total / boundaries.len() as f64)
}
