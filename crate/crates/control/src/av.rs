//! Arousal-valence sequences and their per-window tokens.

use serde::{Deserialize, Serialize};

use crate::{ControlError, Result};

/// Per-frame arousal and valence, both in `[−1, 1]`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvSequence {
    arousal: Vec<f64>,
    valence: Vec<f64>,
}

impl AvSequence {
    pub fn new(arousal: Vec<f64>, valence: Vec<f64>) -> Result<Self> {
        if arousal.len() != valence.len() {
            return Err(ControlError::Shape(format!(
                "{} arousal frames vs {} valence frames",
                arousal.len(),
                valence.len()
            )));
        }
        for (what, xs) in [("arousal", &arousal), ("valence", &valence)] {
            for &v in xs.iter() {
                if !v.is_finite() {
                    return Err(ControlError::NonFinite(what));
                }
                if !(-1.0..=1.0).contains(&v) {
                    return Err(ControlError::Range {
                        what,
                        value: v,
                        lo: -1.0,
                        hi: 1.0,
                    });
                }
            }
        }
        Ok(Self { arousal, valence })
    }

    pub fn len(&self) -> usize {
        self.arousal.len()
    }

    pub fn is_empty(&self) -> bool {
        self.arousal.is_empty()
    }

    pub fn arousal(&self) -> &[f64] {
        &self.arousal
    }

    pub fn valence(&self) -> &[f64] {
        &self.valence
    }

    pub fn reversed(&self) -> Self {
        let mut a = self.arousal.clone();
        let mut v = self.valence.clone();
        a.reverse();
        v.reverse();
        Self { arousal: a, valence: v }
    }
}

/// The value range binned by [`av_tokens`]. Model conditioning uses
/// `[−1, 1]`; emotion-adapter labels use `[0, 1]`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct AvRange {
    pub lo: f64,
    pub hi: f64,
}

impl AvRange {
    pub const CONDITIONING: Self = Self { lo: -1.0, hi: 1.0 };
    pub const ADAPTER: Self = Self { lo: 0.0, hi: 1.0 };

    /// Equal-width bin of `x`; values at or above the top edge land in the
    /// last bin, values below the bottom edge in the first.
    pub fn bin(&self, x: f64, bins: usize) -> usize {
        let u = (x - self.lo) / (self.hi - self.lo);
        ((u * bins as f64).floor().max(0.0) as usize).min(bins - 1)
    }
}

/// One `(valence, arousal)` token pair per complete window: frame values
/// are averaged over the window, then binned. A trailing partial window is
/// discarded so that a sequence and its time reversal tokenize to reversed
/// token lists whenever the length is a whole number of windows.
pub fn av_tokens(
    av: &AvSequence,
    bins: usize,
    window_s: f64,
    fps: f64,
    range: AvRange,
) -> Result<Vec<(usize, usize)>> {
    if bins < 2 {
        return Err(ControlError::Param(format!("bins {bins} < 2")));
    }
    if !(range.hi > range.lo) {
        return Err(ControlError::Param(format!("empty range [{}, {}]", range.lo, range.hi)));
    }
    let w = (window_s * fps).round() as usize;
    if w == 0 {
        return Err(ControlError::Param("window shorter than one frame".into()));
    }
    if av.len() < w {
        return Err(ControlError::Param(format!(
            "sequence of {} frames shorter than one {w}-frame window",
            av.len()
        )));
    }
    let mean = |xs: &[f64]| xs.iter().sum::<f64>() / xs.len() as f64;
    Ok((0..av.len() / w)
        .map(|i| {
            let r = i * w..(i + 1) * w;
            (
                range.bin(mean(&av.valence[r.clone()]), bins),
                range.bin(mean(&av.arousal[r]), bins),
            )
        })
        .collect())
}
