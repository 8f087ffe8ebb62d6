//! Hidden-state sequences and their resampling to a token rate.

use dyadic_tensor::Matrix;
use serde::{Deserialize, Serialize};

use crate::{AdapterError, Result};

/// Final-layer hidden states of the speech model, one row per position.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct HiddenStates {
    pub h: Matrix,
    /// Positions per second.
    pub source_rate: f64,
}

impl HiddenStates {
    pub fn new(h: Matrix, source_rate: f64) -> Result<Self> {
        if h.rows() == 0 {
            return Err(AdapterError::Domain("hidden states need at least one position".into()));
        }
        if !(source_rate > 0.0 && source_rate.is_finite()) {
            return Err(AdapterError::Domain(format!("source rate {source_rate} must be positive")));
        }
        if h.data().iter().any(|v| !v.is_finite()) {
            return Err(AdapterError::Domain("hidden states contain non-finite values".into()));
        }
        Ok(Self { h, source_rate })
    }

    pub fn len(&self) -> usize {
        self.h.rows()
    }

    pub fn is_empty(&self) -> bool {
        self.h.rows() == 0
    }

    pub fn duration_s(&self) -> f64 {
        self.len() as f64 / self.source_rate
    }

    /// Resampled to `rate` positions per second.
    pub fn at_rate(&self, rate: f64) -> Result<Matrix> {
        interpolate_hidden(&self.h, self.source_rate, rate)
    }
}

/// Linear resampling along time to `round(L * target / source)` rows.
///
/// Every row stands for the centre of its interval: output `j` is read at
/// source position `(j + 0.5) * source / target - 0.5`. Positions outside
/// the source extend the first or last segment linearly, so linear signals
/// survive any chain of rate changes.
pub fn interpolate_hidden(h: &Matrix, source_rate: f64, target_rate: f64) -> Result<Matrix> {
    if !(source_rate > 0.0 && target_rate > 0.0) {
        return Err(AdapterError::Domain(format!(
            "rates must be positive, got {source_rate} and {target_rate}"
        )));
    }
    let l = h.rows();
    let out_len = (l as f64 * target_rate / source_rate).round() as usize;
    if out_len == 0 {
        return Err(AdapterError::Domain(format!(
            "{l} positions at {source_rate}/s leave no position at {target_rate}/s"
        )));
    }
    let step = source_rate / target_rate;
    let mut out = Vec::with_capacity(out_len * h.cols());
    for j in 0..out_len {
        if l == 1 {
            out.extend_from_slice(h.row(0));
            continue;
        }
        let pos = (j as f64 + 0.5) * step - 0.5;
        let lo = (pos.floor().max(0.0) as usize).min(l - 2);
        let frac = pos - lo as f64;
        out.extend(h.row(lo).iter().zip(h.row(lo + 1)).map(|(a, b)| a + frac * (b - a)));
    }
    Ok(Matrix::from_vec(out_len, h.cols(), out))
}
