//! Synthetic speech with a planted gesture timeline.
//!
//! Speech is cut into fixed-length segments. Each segment carries one label
//! (a gesture or null) and its tokens are drawn from a token set reserved
//! for that label, so the label is recoverable from local speech content.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::lm::LM_RATE;
use crate::{AdapterError, Result};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureConfig {
    pub sequences: usize,
    pub duration_s: f64,
    /// Length of a constant-label segment. Below one second the labels have
    /// sub-second structure.
    pub segment_s: f64,
    /// Gesture classes; the null class gets id `gestures`.
    pub gestures: usize,
    /// Probability that a segment is null.
    pub null_share: f64,
    /// Tokens reserved per label.
    pub tokens_per_label: u32,
}

impl Default for FixtureConfig {
    fn default() -> Self {
        Self {
            sequences: 40,
            duration_s: 12.0,
            segment_s: 0.5,
            gestures: 4,
            null_share: 0.4,
            tokens_per_label: 3,
        }
    }
}

impl FixtureConfig {
    pub fn vocab(&self) -> u32 {
        (self.gestures as u32 + 1) * self.tokens_per_label
    }

    pub fn null_id(&self) -> usize {
        self.gestures
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FixtureSequence {
    pub tokens: Vec<u32>,
    /// Label of every token position.
    pub labels: Vec<usize>,
}

pub fn gesture_fixture(cfg: &FixtureConfig, seed: u64) -> Result<Vec<FixtureSequence>> {
    if cfg.gestures == 0 || cfg.tokens_per_label == 0 || cfg.sequences == 0 {
        return Err(AdapterError::Domain("fixture sizes must be positive".into()));
    }
    if !(cfg.segment_s > 0.0 && cfg.duration_s >= cfg.segment_s) {
        return Err(AdapterError::Domain("segments must be positive and fit the duration".into()));
    }
    if !(0.0..=1.0).contains(&cfg.null_share) {
        return Err(AdapterError::Domain(format!("null share {} outside [0, 1]", cfg.null_share)));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = (cfg.duration_s * LM_RATE).round() as usize;
    let per_segment = cfg.segment_s * LM_RATE;
    let segments = (n as f64 / per_segment).ceil() as usize;
    let mut out = Vec::with_capacity(cfg.sequences);
    for _ in 0..cfg.sequences {
        let seg_labels: Vec<usize> = (0..segments)
            .map(|_| {
                if rng.random::<f64>() < cfg.null_share {
                    cfg.null_id()
                } else {
                    rng.random_range(0..cfg.gestures)
                }
            })
            .collect();
        let labels: Vec<usize> = (0..n)
            .map(|i| seg_labels[((i as f64 / per_segment) as usize).min(segments - 1)])
            .collect();
        let tokens = labels
            .iter()
            .map(|&l| l as u32 * cfg.tokens_per_label + rng.random_range(0..cfg.tokens_per_label))
            .collect();
        out.push(FixtureSequence { tokens, labels });
    }
    Ok(out)
}

/// Window labels at `rate` windows per second from per-position labels at
/// `source_rate`: the most frequent label among the positions whose start
/// time falls in the window, ties going to the smallest id. `windows` fixes the
/// count; a window with no position takes the nearest position's label.
pub fn window_labels(fine: &[usize], source_rate: f64, rate: f64, windows: usize) -> Result<Vec<usize>> {
    if fine.is_empty() {
        return Err(AdapterError::Domain("no labels to window".into()));
    }
    if !(source_rate > 0.0 && rate > 0.0) {
        return Err(AdapterError::Domain("rates must be positive".into()));
    }
    let classes = fine.iter().max().map_or(0, |m| m + 1);
    let mut counts = vec![vec![0usize; classes]; windows];
    for (i, &l) in fine.iter().enumerate() {
        let w = ((i as f64 / source_rate * rate + 1e-9) as usize).min(windows.saturating_sub(1));
        if windows > 0 {
            counts[w][l] += 1;
        }
    }
    Ok(counts
        .iter()
        .enumerate()
        .map(|(w, c)| {
            let best = c.iter().copied().max().unwrap_or(0);
            if best == 0 {
                let centre = ((w as f64 + 0.5) / rate * source_rate) as usize;
                fine[centre.min(fine.len() - 1)]
            } else {
                c.iter().position(|&x| x == best).unwrap_or(0)
            }
        })
        .collect())
}
