//! Fréchet distance between Gaussian fits of two feature sets.

use dyadic_tensor::Matrix;
use nalgebra::{DMatrix, DVector, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::{MetricError, Result};

/// Diagonal regularisation added to both covariances.
pub const DEFAULT_EPS: f64 = 1e-6;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GaussianFit {
    pub mean: Vec<f64>,
    /// Row-major `D x D` covariance.
    pub cov: Vec<f64>,
}

impl GaussianFit {
    /// Sample mean and unbiased covariance of the rows of `feats`.
    pub fn fit(feats: &Matrix) -> Result<Self> {
        let n = feats.rows();
        if n < 2 {
            return Err(MetricError::Param(format!("need at least 2 samples, got {n}")));
        }
        if !feats.is_finite() {
            return Err(MetricError::Numeric("non-finite feature".into()));
        }
        let mean = feats.col_means().data().to_vec();
        let mut centred = feats.clone();
        for r in 0..n {
            for (v, m) in centred.row_mut(r).iter_mut().zip(&mean) {
                *v -= m;
            }
        }
        let cov = centred.matmul_tn(&centred).scale(1.0 / (n - 1) as f64);
        Ok(Self {
            mean,
            cov: cov.data().to_vec(),
        })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    fn cov_matrix(&self, eps: f64) -> DMatrix<f64> {
        let d = self.dim();
        let mut c = DMatrix::from_row_slice(d, d, &self.cov);
        c = (&c + c.transpose()) * 0.5;
        for i in 0..d {
            c[(i, i)] += eps;
        }
        c
    }
}

/// Symmetric PSD square root; eigenvalues below zero from round-off are
/// clamped.
fn sqrt_psd(m: &DMatrix<f64>) -> DMatrix<f64> {
    let eig = SymmetricEigen::new(m.clone());
    let vals = DVector::from_iterator(eig.eigenvalues.len(), eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()));
    &eig.eigenvectors * DMatrix::from_diagonal(&vals) * eig.eigenvectors.transpose()
}

/// `‖μ₁ − μ₂‖² + Tr(Σ₁ + Σ₂ − 2(Σ₁Σ₂)^{1/2})` on regularised covariances.
///
/// `Tr((Σ₁Σ₂)^{1/2})` is evaluated as `Tr((√Σ₁ Σ₂ √Σ₁)^{1/2})`, whose
/// argument is symmetric PSD and has the same eigenvalues as `Σ₁Σ₂`.
pub fn frechet_from_fits(a: &GaussianFit, b: &GaussianFit, eps: f64) -> Result<f64> {
    if a.dim() != b.dim() {
        return Err(MetricError::Shape(format!("feature widths {} and {}", a.dim(), b.dim())));
    }
    if !(eps >= 0.0) {
        return Err(MetricError::Param(format!("eps {eps} must be non-negative")));
    }
    let (s1, s2) = (a.cov_matrix(eps), b.cov_matrix(eps));
    let r1 = sqrt_psd(&s1);
    let mid = &r1 * &s2 * &r1;
    let mid = (&mid + mid.transpose()) * 0.5;
    let eig = SymmetricEigen::try_new(mid, f64::EPSILON, 10_000)
        .ok_or_else(|| MetricError::Numeric("eigendecomposition did not converge".into()))?;
    let tr_sqrt: f64 = eig.eigenvalues.iter().map(|&l| l.max(0.0).sqrt()).sum();
    let mean_term: f64 = a.mean.iter().zip(&b.mean).map(|(x, y)| (x - y) * (x - y)).sum();
    let d = mean_term + s1.trace() + s2.trace() - 2.0 * tr_sqrt;
    if !d.is_finite() {
        return Err(MetricError::Numeric("non-finite distance".into()));
    }
    Ok(d)
}

/// Squared Fréchet distance between Gaussian fits of the rows of `a` and `b`.
pub fn frechet_distance(a: &Matrix, b: &Matrix, eps: f64) -> Result<f64> {
    if a.cols() != b.cols() {
        return Err(MetricError::Shape(format!("feature widths {} and {}", a.cols(), b.cols())));
    }
    frechet_from_fits(&GaussianFit::fit(a)?, &GaussianFit::fit(b)?, eps)
}
