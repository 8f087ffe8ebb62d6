//! Threshold buckets for scalar control channels.

use serde::{Deserialize, Serialize};

use crate::{ControlError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Scheme {
    /// Thresholds at the three quartiles, so four buckets.
    Quartile,
    /// Thresholds at the `k − 1` interior `i/k` quantiles.
    Quantile,
}

/// Strictly ascending thresholds; `k = thresholds.len() + 1` buckets.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BucketSpec {
    pub thresholds: Vec<f64>,
}

impl BucketSpec {
    pub fn new(thresholds: Vec<f64>) -> Result<Self> {
        if thresholds.is_empty() {
            return Err(ControlError::Param("need at least one threshold (k >= 2)".into()));
        }
        if thresholds.iter().any(|t| !t.is_finite()) {
            return Err(ControlError::NonFinite("thresholds"));
        }
        if thresholds.windows(2).any(|w| w[0] >= w[1]) {
            return Err(ControlError::Param(format!("thresholds not strictly ascending: {thresholds:?}")));
        }
        Ok(Self { thresholds })
    }

    pub fn buckets(&self) -> usize {
        self.thresholds.len() + 1
    }

    /// `b = Σ 1(x > τ_i)`.
    pub fn index(&self, x: f64) -> usize {
        self.thresholds.iter().filter(|&&t| x > t).count()
    }
}

/// Interior quantiles of `samples` with linear interpolation between order
/// statistics.
pub fn fit_thresholds(samples: &[f64], k: usize, scheme: Scheme) -> Result<BucketSpec> {
    if samples.is_empty() {
        return Err(ControlError::Param("no samples".into()));
    }
    if samples.iter().any(|v| !v.is_finite()) {
        return Err(ControlError::NonFinite("samples"));
    }
    let k = match scheme {
        Scheme::Quartile => 4,
        Scheme::Quantile => k,
    };
    if k < 2 {
        return Err(ControlError::Param(format!("bucket count {k} < 2")));
    }
    let mut sorted = samples.to_vec();
    sorted.sort_by(f64::total_cmp);
    if sorted[0] == sorted[sorted.len() - 1] {
        return Err(ControlError::Degenerate("all samples are equal".into()));
    }
    let n = sorted.len();
    let q = |p: f64| {
        let h = p * (n - 1) as f64;
        let lo = h.floor() as usize;
        let hi = (lo + 1).min(n - 1);
        sorted[lo] + (h - lo as f64) * (sorted[hi] - sorted[lo])
    };
    let thresholds: Vec<f64> = (1..k).map(|i| q(i as f64 / k as f64)).collect();
    if thresholds.windows(2).any(|w| w[0] >= w[1]) {
        return Err(ControlError::Degenerate(format!(
            "ties collapse the {k}-bucket quantiles: {thresholds:?}"
        )));
    }
    BucketSpec::new(thresholds)
}

pub fn bucketize(x: &[f64], spec: &BucketSpec) -> Vec<usize> {
    x.iter().map(|&v| spec.index(v)).collect()
}
