//! Classification scores for predicted codes.

use std::collections::BTreeSet;

use serde::{Deserialize, Serialize};

use crate::{AdapterError, Result};

/// Fine emotion tokens per axis.
pub const EMOTION_TOKENS: usize = 12;

/// Coarsens a 12-level emotion token into low/mid/high thirds:
/// 0..=3 → 0, 4..=7 → 1, 8..=11 → 2.
pub fn group_3class(id: usize) -> Result<usize> {
    if id >= EMOTION_TOKENS {
        return Err(AdapterError::Domain(format!("emotion token {id} outside 0..{EMOTION_TOKENS}")));
    }
    Ok(id / 4)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Prf {
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

fn check_lengths(pred: &[usize], gold: &[usize]) -> Result<()> {
    if pred.len() != gold.len() {
        return Err(AdapterError::Shape(format!("{} predictions for {} labels", pred.len(), gold.len())));
    }
    Ok(())
}

pub fn accuracy(pred: &[usize], gold: &[usize]) -> Result<f64> {
    check_lengths(pred, gold)?;
    if gold.is_empty() {
        return Err(AdapterError::Domain("accuracy of an empty set".into()));
    }
    Ok(pred.iter().zip(gold).filter(|(p, g)| p == g).count() as f64 / gold.len() as f64)
}

/// Macro-averaged precision, recall and F1 over every class that occurs in
/// `gold` or `pred`, leaving out `exclude`. A ratio with a zero denominator
/// counts as 0.
pub fn macro_prf(pred: &[usize], gold: &[usize], exclude: &[usize]) -> Result<Prf> {
    check_lengths(pred, gold)?;
    let classes: BTreeSet<usize> = gold.iter().chain(pred).copied().filter(|c| !exclude.contains(c)).collect();
    if classes.is_empty() {
        return Err(AdapterError::Domain("no class left to average over".into()));
    }
    let ratio = |a: usize, b: usize| if b == 0 { 0.0 } else { a as f64 / b as f64 };
    let (mut p, mut r, mut f) = (0.0, 0.0, 0.0);
    for &c in &classes {
        let tp = pred.iter().zip(gold).filter(|&(&x, &y)| x == c && y == c).count();
        let predicted = pred.iter().filter(|&&x| x == c).count();
        let actual = gold.iter().filter(|&&y| y == c).count();
        let (pc, rc) = (ratio(tp, predicted), ratio(tp, actual));
        p += pc;
        r += rc;
        f += if pc + rc > 0.0 { 2.0 * pc * rc / (pc + rc) } else { 0.0 };
    }
    let k = classes.len() as f64;
    Ok(Prf {
        precision: p / k,
        recall: r / k,
        f1: f / k,
    })
}
