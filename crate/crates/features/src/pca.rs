//! Principal-component basis for compact motion representations.

use dyadic_tensor::Matrix;
use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{FeatureError, Result};

/// Orthonormal basis of the top principal directions of a set of frames.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Pca {
    pub mean: Vec<f64>,
    /// `k x D`, one unit-norm component per row, by decreasing variance.
    pub components: Matrix,
    /// Variance along each kept component.
    pub variances: Vec<f64>,
    /// Total variance of the fitted frames.
    pub total_variance: f64,
}

impl Pca {
    /// Fits the `k` leading components of the rows of all parts.
    pub fn fit(parts: &[&Matrix], k: usize) -> Result<Self> {
        let d = parts
            .first()
            .map(|m| m.cols())
            .ok_or_else(|| FeatureError::Param("no data to fit".into()))?;
        if k == 0 || k > d {
            return Err(FeatureError::Param(format!("rank {k} outside 1..={d}")));
        }
        let n: usize = parts.iter().map(|m| m.rows()).sum();
        if n < 2 {
            return Err(FeatureError::Param("need at least two frames".into()));
        }
        let mut mean = vec![0.0; d];
        for m in parts {
            if m.cols() != d {
                return Err(FeatureError::Shape {
                    expected: format!("{d} columns"),
                    got: format!("{} columns", m.cols()),
                });
            }
            for r in 0..m.rows() {
                for (s, v) in mean.iter_mut().zip(m.row(r)) {
                    *s += v;
                }
            }
        }
        mean.iter_mut().for_each(|s| *s /= n as f64);
        let mut cov = DMatrix::<f64>::zeros(d, d);
        let mut centred = vec![0.0; d];
        for m in parts {
            for r in 0..m.rows() {
                for ((c, v), mu) in centred.iter_mut().zip(m.row(r)).zip(&mean) {
                    *c = v - mu;
                }
                for i in 0..d {
                    let ci = centred[i];
                    for j in i..d {
                        cov[(i, j)] += ci * centred[j];
                    }
                }
            }
        }
        for i in 0..d {
            for j in i..d {
                let v = cov[(i, j)] / (n - 1) as f64;
                cov[(i, j)] = v;
                cov[(j, i)] = v;
            }
        }
        let total_variance = cov.trace();
        let eig = SymmetricEigen::new(cov);
        let mut order: Vec<usize> = (0..d).collect();
        order.sort_by(|&a, &b| eig.eigenvalues[b].total_cmp(&eig.eigenvalues[a]));
        let mut comps = Vec::with_capacity(k * d);
        let mut variances = Vec::with_capacity(k);
        for &i in &order[..k] {
            let col = eig.eigenvectors.column(i);
            // Fix the sign so the largest-magnitude entry is positive.
            let pivot = col.iter().copied().max_by(|a, b| a.abs().total_cmp(&b.abs())).unwrap_or(1.0);
            let sign = if pivot < 0.0 { -1.0 } else { 1.0 };
            comps.extend(col.iter().map(|v| v * sign));
            variances.push(eig.eigenvalues[i].max(0.0));
        }
        Ok(Self {
            mean,
            components: Matrix::from_vec(k, d, comps),
            variances,
            total_variance,
        })
    }

    pub fn rank(&self) -> usize {
        self.components.rows()
    }

    pub fn dim(&self) -> usize {
        self.components.cols()
    }

    /// Share of the total variance the kept components explain.
    pub fn explained(&self) -> f64 {
        if self.total_variance > 0.0 {
            self.variances.iter().sum::<f64>() / self.total_variance
        } else {
            1.0
        }
    }

    /// `N x D` frames to `N x k` coordinates.
    pub fn encode(&self, x: &Matrix) -> Result<Matrix> {
        self.check(x.cols(), self.dim())?;
        let mut centred = x.clone();
        for r in 0..centred.rows() {
            for (v, mu) in centred.row_mut(r).iter_mut().zip(&self.mean) {
                *v -= mu;
            }
        }
        Ok(centred.matmul_nt(&self.components))
    }

    /// `N x k` coordinates back to `N x D` frames.
    pub fn decode(&self, z: &Matrix) -> Result<Matrix> {
        self.check(z.cols(), self.rank())?;
        let mut x = z.matmul(&self.components);
        for r in 0..x.rows() {
            for (v, mu) in x.row_mut(r).iter_mut().zip(&self.mean) {
                *v += mu;
            }
        }
        Ok(x)
    }

    fn check(&self, got: usize, expected: usize) -> Result<()> {
        if got != expected {
            return Err(FeatureError::Shape {
                expected: format!("{expected} columns"),
                got: format!("{got} columns"),
            });
        }
        Ok(())
    }
}
