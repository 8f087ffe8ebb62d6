//! Closed forms of the linear noise-to-data path.

use dyadic_tensor::Matrix;
use serde::{Deserialize, Serialize};

use crate::{FlowError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Schedule {
    pub sigma_min: f64,
}

impl Default for Schedule {
    fn default() -> Self {
        Self { sigma_min: 1e-4 }
    }
}

impl Schedule {
    pub fn new(sigma_min: f64) -> Result<Self> {
        if !(sigma_min > 0.0 && sigma_min < 1.0) {
            return Err(FlowError::Domain(format!("sigma_min {sigma_min} outside (0, 1)")));
        }
        Ok(Self { sigma_min })
    }
}

fn same_shape(a: &Matrix, b: &Matrix) -> Result<()> {
    if a.shape() != b.shape() {
        return Err(FlowError::Shape(format!("{:?} vs {:?}", a.shape(), b.shape())));
    }
    Ok(())
}

/// `x_t = t·x + (1 − (1 − σ_min)·t)·ε`.
pub fn interpolant(x: &Matrix, eps: &Matrix, t: f64, s: Schedule) -> Result<Matrix> {
    if !(0.0..=1.0).contains(&t) {
        return Err(FlowError::Domain(format!("t = {t} outside [0, 1]")));
    }
    same_shape(x, eps)?;
    let c = 1.0 - (1.0 - s.sigma_min) * t;
    Ok(x.zip_map(eps, |a, e| t * a + c * e))
}

/// `v = x − (1 − σ_min)·ε`, the time derivative of [`interpolant`].
pub fn target_velocity(x: &Matrix, eps: &Matrix, s: Schedule) -> Result<Matrix> {
    same_shape(x, eps)?;
    let k = 1.0 - s.sigma_min;
    Ok(x.zip_map(eps, |a, e| a - k * e))
}

/// Classifier-free guidance: `v_u + w·(v_c − v_u)`.
pub fn cfg_combine(v_cond: &Matrix, v_uncond: &Matrix, w: f64) -> Result<Matrix> {
    same_shape(v_cond, v_uncond)?;
    Ok(v_uncond.zip_map(v_cond, |u, c| u + w * (c - u)))
}
