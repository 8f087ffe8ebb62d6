//! Rate conversion between the 12.5 Hz speech stream and 30 fps motion.

use dyadic_tensor::Matrix;

use crate::{FeatureError, Result, FPS, SPEECH_RATE};

/// Guards the floor against `i * src / dst` landing a hair under an integer.
const INDEX_EPS: f64 = 1e-9;

fn source_index(i: usize, src_rate: f64, dst_rate: f64, len: usize) -> usize {
    let pos = (i as f64 * src_rate / dst_rate + INDEX_EPS).floor() as usize;
    pos.min(len - 1)
}

fn check(len: usize, src_rate: f64, dst_rate: f64, n: usize) -> Result<()> {
    if len == 0 {
        return Err(FeatureError::Param("empty source sequence".into()));
    }
    if n == 0 {
        return Err(FeatureError::Param("target length must be positive".into()));
    }
    if !(src_rate > 0.0 && dst_rate > 0.0) {
        return Err(FeatureError::Param("rates must be positive".into()));
    }
    Ok(())
}

/// Nearest-previous resampling: output `i` takes source sample
/// `floor(i * src_rate / dst_rate)`, clamped to the last sample.
pub fn resample_nearest<T: Clone>(src: &[T], src_rate: f64, dst_rate: f64, n: usize) -> Result<Vec<T>> {
    check(src.len(), src_rate, dst_rate, n)?;
    Ok((0..n)
        .map(|i| src[source_index(i, src_rate, dst_rate, src.len())].clone())
        .collect())
}

/// Speech tokens at 12.5 Hz to `n` motion frames at 30 fps.
pub fn resample_condition<T: Clone>(src: &[T], n: usize) -> Result<Vec<T>> {
    resample_nearest(src, SPEECH_RATE, FPS, n)
}

/// Row-wise nearest-previous resampling of a feature matrix.
pub fn resample_rows(src: &Matrix, src_rate: f64, dst_rate: f64, n: usize) -> Result<Matrix> {
    check(src.rows(), src_rate, dst_rate, n)?;
    let mut out = Vec::with_capacity(n * src.cols());
    for i in 0..n {
        out.extend_from_slice(src.row(source_index(i, src_rate, dst_rate, src.rows())));
    }
    Ok(Matrix::from_vec(n, src.cols(), out))
}

/// Linear interpolation for continuous conditions. Output `i` sits at source
/// position `i * src_rate / dst_rate`; positions past the end hold the last row.
pub fn resample_linear(src: &Matrix, src_rate: f64, dst_rate: f64, n: usize) -> Result<Matrix> {
    check(src.rows(), src_rate, dst_rate, n)?;
    let last = src.rows() - 1;
    let mut out = Vec::with_capacity(n * src.cols());
    for i in 0..n {
        let pos = i as f64 * src_rate / dst_rate;
        let lo = (pos.floor() as usize).min(last);
        let hi = (lo + 1).min(last);
        let frac = if lo == last { 0.0 } else { pos - lo as f64 };
        out.extend(
            src.row(lo)
                .iter()
                .zip(src.row(hi))
                .map(|(a, b)| a + frac * (b - a)),
        );
    }
    Ok(Matrix::from_vec(n, src.cols(), out))
}
