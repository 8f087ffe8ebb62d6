//! Agreement between human and automatic item-level score deltas.

use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal, StudentsT};

use crate::{MetricError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Coefficient {
    pub value: f64,
    /// Two-sided.
    pub p_value: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Correlation {
    pub n: usize,
    pub pearson: Coefficient,
    pub kendall: Coefficient,
    pub spearman: Coefficient,
}

fn check(x: &[f64], y: &[f64]) -> Result<()> {
    if x.len() != y.len() {
        return Err(MetricError::Shape(format!("{} vs {} items", x.len(), y.len())));
    }
    if x.len() < 3 {
        return Err(MetricError::Param(format!("need at least 3 paired items, got {}", x.len())));
    }
    if x.iter().chain(y).any(|v| !v.is_finite()) {
        return Err(MetricError::Numeric("non-finite delta".into()));
    }
    Ok(())
}

/// Two-sided p-value of a correlation through its t statistic.
fn t_test(r: f64, n: usize) -> f64 {
    if r.abs() >= 1.0 {
        return 0.0;
    }
    let df = (n - 2) as f64;
    let t = r * (df / (1.0 - r * r)).sqrt();
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive degrees of freedom");
    2.0 * (1.0 - dist.cdf(t.abs()))
}

fn pearson_value(x: &[f64], y: &[f64]) -> Result<f64> {
    let n = x.len() as f64;
    let (mx, my) = (x.iter().sum::<f64>() / n, y.iter().sum::<f64>() / n);
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in x.iter().zip(y) {
        sxy += (a - mx) * (b - my);
        sxx += (a - mx) * (a - mx);
        syy += (b - my) * (b - my);
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(MetricError::Undefined("zero variance".into()));
    }
    Ok((sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0))
}

pub fn pearson(x: &[f64], y: &[f64]) -> Result<Coefficient> {
    check(x, y)?;
    let r = pearson_value(x, y)?;
    Ok(Coefficient {
        value: r,
        p_value: t_test(r, x.len()),
    })
}

/// Ranks starting at 1, ties sharing the mean of their positions.
pub fn midranks(x: &[f64]) -> Vec<f64> {
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));
    let mut ranks = vec![0.0; x.len()];
    let mut i = 0;
    while i < idx.len() {
        let mut j = i;
        while j + 1 < idx.len() && x[idx[j + 1]] == x[idx[i]] {
            j += 1;
        }
        let r = (i + j) as f64 / 2.0 + 1.0;
        for &k in &idx[i..=j] {
            ranks[k] = r;
        }
        i = j + 1;
    }
    ranks
}

pub fn spearman(x: &[f64], y: &[f64]) -> Result<Coefficient> {
    check(x, y)?;
    let rho = pearson_value(&midranks(x), &midranks(y))?;
    Ok(Coefficient {
        value: rho,
        p_value: t_test(rho, x.len()),
    })
}

/// Sizes of runs of equal values in a sorted slice.
fn tie_groups<T: PartialEq>(sorted: &[T]) -> Vec<u64> {
    let mut out = Vec::new();
    let mut i = 0;
    while i < sorted.len() {
        let mut j = i + 1;
        while j < sorted.len() && sorted[j] == sorted[i] {
            j += 1;
        }
        out.push((j - i) as u64);
        i = j;
    }
    out
}

fn pairs(t: u64) -> u64 {
    t * t.saturating_sub(1) / 2
}

/// Merge sort that returns the number of inversions.
fn sort_count(v: &mut [f64], buf: &mut Vec<f64>) -> u64 {
    let n = v.len();
    if n < 2 {
        return 0;
    }
    let mid = n / 2;
    let mut swaps = sort_count(&mut v[..mid], buf) + sort_count(&mut v[mid..], buf);
    buf.clear();
    let (mut i, mut j) = (0, mid);
    while i < mid && j < n {
        if v[j] < v[i] {
            swaps += (mid - i) as u64;
            buf.push(v[j]);
            j += 1;
        } else {
            buf.push(v[i]);
            i += 1;
        }
    }
    buf.extend_from_slice(&v[i..mid]);
    buf.extend_from_slice(&v[j..n]);
    v.copy_from_slice(buf);
    swaps
}

/// Counts behind Kendall's τ-b.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct KendallCounts {
    /// Concordant minus discordant pairs.
    pub s: i64,
    /// Pairs not tied in x.
    pub untied_x: u64,
    /// Pairs not tied in y.
    pub untied_y: u64,
}

impl KendallCounts {
    pub fn tau_b(&self) -> f64 {
        self.s as f64 / ((self.untied_x as f64) * (self.untied_y as f64)).sqrt()
    }
}

/// Knight's `O(n log n)` pair counting.
pub fn kendall_counts(x: &[f64], y: &[f64]) -> KendallCounts {
    let n = x.len() as u64;
    let mut idx: Vec<usize> = (0..x.len()).collect();
    idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]).then(y[a].total_cmp(&y[b])));
    let xs: Vec<f64> = idx.iter().map(|&i| x[i]).collect();
    let xy: Vec<(f64, f64)> = idx.iter().map(|&i| (x[i], y[i])).collect();
    let tied_x: u64 = tie_groups(&xs).into_iter().map(pairs).sum();
    let tied_xy: u64 = tie_groups(&xy).into_iter().map(pairs).sum();
    let mut ys: Vec<f64> = idx.iter().map(|&i| y[i]).collect();
    let mut buf = Vec::with_capacity(ys.len());
    let swaps = sort_count(&mut ys, &mut buf);
    let tied_y: u64 = tie_groups(&ys).into_iter().map(pairs).sum();
    let total = pairs(n);
    // Pairs untied in both: concordant + discordant = total − tx − ty + txy,
    // and the discordant ones are exactly the swaps.
    let s = total as i64 - tied_x as i64 - tied_y as i64 + tied_xy as i64 - 2 * swaps as i64;
    KendallCounts {
        s,
        untied_x: total - tied_x,
        untied_y: total - tied_y,
    }
}

pub fn kendall_tau_b(x: &[f64], y: &[f64]) -> Result<Coefficient> {
    check(x, y)?;
    let c = kendall_counts(x, y);
    if c.untied_x == 0 || c.untied_y == 0 {
        return Err(MetricError::Undefined("all values tied".into()));
    }
    let tau = c.tau_b();
    // Normal approximation to S with the tie-corrected variance.
    let n = x.len() as f64;
    let ties = |v: &[f64]| {
        let mut s = v.to_vec();
        s.sort_by(f64::total_cmp);
        tie_groups(&s).into_iter().map(|t| t as f64).collect::<Vec<_>>()
    };
    let (tx, ty) = (ties(x), ties(y));
    let sum = |ts: &[f64], f: &dyn Fn(f64) -> f64| ts.iter().map(|&t| f(t)).sum::<f64>();
    let v0 = n * (n - 1.0) * (2.0 * n + 5.0);
    let vt = sum(&tx, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let vu = sum(&ty, &|t| t * (t - 1.0) * (2.0 * t + 5.0));
    let v1 = sum(&tx, &|t| t * (t - 1.0)) * sum(&ty, &|t| t * (t - 1.0)) / (2.0 * n * (n - 1.0));
    let v2 = sum(&tx, &|t| t * (t - 1.0) * (t - 2.0)) * sum(&ty, &|t| t * (t - 1.0) * (t - 2.0))
        / (9.0 * n * (n - 1.0) * (n - 2.0));
    let var = (v0 - vt - vu) / 18.0 + v1 + v2;
    let p = if var > 0.0 {
        let z = c.s as f64 / var.sqrt();
        2.0 * (1.0 - Normal::standard().cdf(z.abs()))
    } else {
        f64::NAN
    };
    Ok(Coefficient {
        value: tau,
        p_value: p.clamp(0.0, 1.0),
    })
}

/// Pearson, Kendall τ-b and Spearman between paired item deltas.
pub fn correlate(human: &[f64], metric: &[f64]) -> Result<Correlation> {
    Ok(Correlation {
        n: human.len(),
        pearson: pearson(human, metric)?,
        kendall: kendall_tau_b(human, metric)?,
        spearman: spearman(human, metric)?,
    })
}
