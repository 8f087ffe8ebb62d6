//! Savitzky–Golay smoothing.

use dyadic_tensor::Matrix;
use nalgebra::DMatrix;

use crate::{FeatureError, Result};

pub const DEFAULT_WINDOW: usize = 9;
pub const DEFAULT_POLYORDER: usize = 2;

/// Weights that evaluate, at each position `p` of a `window`-long stretch,
/// the least-squares polynomial of degree `polyorder` fitted to that stretch.
/// Row `p` of the result holds the weights for position `p`.
fn fit_weights(window: usize, polyorder: usize) -> Result<DMatrix<f64>> {
    let half = (window / 2) as f64;
    let scale = half.max(1.0);
    let v = DMatrix::from_fn(window, polyorder + 1, |i, k| {
        ((i as f64 - half) / scale).powi(k as i32)
    });
    let gram = v.transpose() * &v;
    let inv = gram
        .try_inverse()
        .ok_or_else(|| FeatureError::Param("singular Savitzky–Golay system".into()))?;
    Ok(&v * inv * v.transpose())
}

/// Per-column polynomial smoothing. Interior frames use the centred window;
/// the first and last `window / 2` frames evaluate the polynomial fitted to
/// the first or last full window, so polynomials up to `polyorder` pass
/// through unchanged everywhere.
pub fn smooth_savgol(x: &Matrix, window: usize, polyorder: usize) -> Result<Matrix> {
    if window % 2 == 0 {
        return Err(FeatureError::Param(format!("window {window} must be odd")));
    }
    if polyorder >= window {
        return Err(FeatureError::Param(format!(
            "polyorder {polyorder} must be below window {window}"
        )));
    }
    let n = x.rows();
    if window > n {
        return Err(FeatureError::Param(format!(
            "window {window} exceeds sequence length {n}"
        )));
    }
    let w = fit_weights(window, polyorder)?;
    let half = window / 2;
    let mut out = Matrix::zeros(n, x.cols());
    for i in 0..n {
        let (start, p) = if i < half {
            (0, i)
        } else if i + half >= n {
            (n - window, i + window - n)
        } else {
            (i - half, half)
        };
        let row = out.row_mut(i);
        for j in 0..window {
            let wt = w[(p, j)];
            for (o, &v) in row.iter_mut().zip(x.row(start + j)) {
                *o += wt * v;
            }
        }
    }
    Ok(out)
}
