//! Motion dynamism and outlier smoothing.

use dyadic_tensor::Matrix;

use crate::{ControlError, Result};

/// Default moving-average window in frames.
pub const DEFAULT_MA_WINDOW: usize = 5;

/// `ṡ_t = |s_t − s_{t−1}|` per channel, with `ṡ_0 = 0`.
pub fn dynamism(s: &Matrix) -> Matrix {
    let mut out = Matrix::zeros(s.rows(), s.cols());
    for t in 1..s.rows() {
        for c in 0..s.cols() {
            out.set(t, c, (s.get(t, c) - s.get(t - 1, c)).abs());
        }
    }
    out
}

/// Centered moving average. Near the edges the window is truncated to the
/// samples that exist. Even windows reach one sample further back than
/// forward.
pub fn moving_average(signal: &[f64], window: usize) -> Result<Vec<f64>> {
    if window == 0 {
        return Err(ControlError::Param("moving-average window must be at least 1".into()));
    }
    let n = signal.len();
    let back = window / 2;
    let fwd = window - 1 - back;
    let mut prefix = Vec::with_capacity(n + 1);
    prefix.push(0.0);
    for &x in signal {
        prefix.push(prefix.last().unwrap() + x);
    }
    Ok((0..n)
        .map(|i| {
            let lo = i.saturating_sub(back);
            let hi = (i + fwd + 1).min(n);
            (prefix[hi] - prefix[lo]) / (hi - lo) as f64
        })
        .collect())
}

/// [`moving_average`] applied to every column.
pub fn moving_average_rows(m: &Matrix, window: usize) -> Result<Matrix> {
    let mut out = Matrix::zeros(m.rows(), m.cols());
    for c in 0..m.cols() {
        let col = moving_average(&m.column(c), window)?;
        for (r, v) in col.into_iter().enumerate() {
            out.set(r, c, v);
        }
    }
    Ok(out)
}
