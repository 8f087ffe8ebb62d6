//! Per-dimension z-scoring with statistics fitted on the training split.

use dyadic_tensor::Matrix;
use serde::{Deserialize, Serialize};

use crate::{FeatureError, Result};

/// Lower bound on a fitted standard deviation, so constant channels do not
/// blow up under division.
pub const STD_FLOOR: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct NormStats {
    pub mean: Vec<f64>,
    pub std: Vec<f64>,
}

impl NormStats {
    /// Population mean and standard deviation over all rows of all parts.
    pub fn fit(parts: &[&Matrix]) -> Result<Self> {
        let d = parts
            .first()
            .map(|m| m.cols())
            .ok_or_else(|| FeatureError::Param("no data to fit".into()))?;
        let mut n = 0usize;
        let mut sum = vec![0.0; d];
        for m in parts {
            if m.cols() != d {
                return Err(shape_err(d, m.cols()));
            }
            for r in 0..m.rows() {
                for (s, v) in sum.iter_mut().zip(m.row(r)) {
                    *s += v;
                }
            }
            n += m.rows();
        }
        if n == 0 {
            return Err(FeatureError::Param("no rows to fit".into()));
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        let mut sq = vec![0.0; d];
        for m in parts {
            for r in 0..m.rows() {
                for ((s, v), mu) in sq.iter_mut().zip(m.row(r)).zip(&mean) {
                    *s += (v - mu) * (v - mu);
                }
            }
        }
        let std = sq
            .iter()
            .map(|s| (s / n as f64).sqrt().max(STD_FLOOR))
            .collect();
        Ok(Self { mean, std })
    }

    /// Stats that leave data unchanged.
    pub fn identity(dim: usize) -> Self {
        Self {
            mean: vec![0.0; dim],
            std: vec![1.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn normalize(&self, x: &Matrix) -> Result<Matrix> {
        self.apply(x, |v, mu, s| (v - mu) / s)
    }

    pub fn denormalize(&self, z: &Matrix) -> Result<Matrix> {
        self.apply(z, |v, mu, s| v * s + mu)
    }

    /// Restriction to a contiguous block of dimensions.
    pub fn slice(&self, start: usize, end: usize) -> Self {
        Self {
            mean: self.mean[start..end].to_vec(),
            std: self.std[start..end].to_vec(),
        }
    }

    fn apply(&self, x: &Matrix, f: impl Fn(f64, f64, f64) -> f64) -> Result<Matrix> {
        if x.cols() != self.dim() {
            return Err(shape_err(self.dim(), x.cols()));
        }
        let mut out = x.clone();
        for r in 0..out.rows() {
            for ((v, mu), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&self.std) {
                *v = f(*v, *mu, *s);
            }
        }
        Ok(out)
    }
}

fn shape_err(expected: usize, got: usize) -> FeatureError {
    FeatureError::Shape {
        expected: format!("{expected} dimensions"),
        got: format!("{got} dimensions"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn mean_maps_to_zero_and_constant_channels_are_floored() {
        let x = Matrix::from_vec(2, 2, vec![1.0, 5.0, 3.0, 5.0]);
        let s = NormStats::fit(&[&x]).unwrap();
        assert_eq!(s.mean, vec![2.0, 5.0]);
        assert_eq!(s.std, vec![1.0, STD_FLOOR]);
        let z = s.normalize(&Matrix::from_vec(1, 2, vec![2.0, 5.0])).unwrap();
        assert_eq!(z.data(), &[0.0, 0.0]);
        assert!(s.normalize(&Matrix::zeros(1, 3)).is_err());
    }
}
