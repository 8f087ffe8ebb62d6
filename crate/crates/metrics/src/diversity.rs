//! Sample diversity.

use dyadic_tensor::Matrix;
use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::{MetricError, Result};

pub const DEFAULT_PAIRS: usize = 30;

/// Mean L2 distance between the time-averaged features of `pairs` disjoint
/// random pairs of samples.
pub fn diversity(samples: &[Matrix], pairs: usize, seed: u64) -> Result<f64> {
    if samples.len() < 2 {
        return Err(MetricError::Param(format!("need at least 2 samples, got {}", samples.len())));
    }
    if pairs == 0 || pairs > samples.len() / 2 {
        return Err(MetricError::Param(format!(
            "{pairs} disjoint pairs requested from {} samples",
            samples.len()
        )));
    }
    let d = samples[0].cols();
    if samples.iter().any(|s| s.cols() != d || s.rows() == 0) {
        return Err(MetricError::Shape("samples differ in width or are empty".into()));
    }
    let means: Vec<Vec<f64>> = samples.iter().map(|s| s.col_means().data().to_vec()).collect();
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let total: f64 = order
        .chunks_exact(2)
        .take(pairs)
        .map(|p| {
            means[p[0]]
                .iter()
                .zip(&means[p[1]])
                .map(|(a, b)| (a - b) * (a - b))
                .sum::<f64>()
                .sqrt()
        })
        .sum();
    Ok(total / pairs as f64)
}
