//! Preference aggregation and export of paired deltas.
//!
//! Ratings are first averaged per item and dimension, then item means are
//! averaged per system match-up. Everything is reported in a canonical
//! orientation: for the pair (first, second) in lexicographic order, a
//! positive value favours `second`.

use std::collections::{BTreeMap, HashMap};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::events::RatingRecord;
use crate::items::StudyItem;
use crate::{Result, StudyError};

/// z-score of a two-sided 95% normal interval.
pub const Z95: f64 = 1.96;

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(tag = "method", rename_all = "snake_case")]
pub enum CiMethod {
    /// 1.96 · s / √n over item means.
    #[default]
    Normal,
    /// Half the width of the 2.5–97.5 percentile band of resampled means.
    Bootstrap { resamples: usize, seed: u64 },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ItemMean {
    pub item_id: String,
    pub sample_id: String,
    pub first: String,
    pub second: String,
    pub dimension_id: u8,
    /// Mean rating, positive favouring `second`.
    pub mean: f64,
    pub n_ratings: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DimensionSummary {
    pub dimension_id: u8,
    pub mean: f64,
    /// 95% half-width; absent with fewer than two items.
    pub ci95: Option<f64>,
    pub n_items: usize,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MatchupSummary {
    pub first: String,
    pub second: String,
    pub dimensions: Vec<DimensionSummary>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub item_means: Vec<ItemMean>,
    pub matchups: Vec<MatchupSummary>,
}

impl Aggregate {
    pub fn matchup(&self, a: &str, b: &str) -> Option<&MatchupSummary> {
        let (first, second) = if a <= b { (a, b) } else { (b, a) };
        self.matchups.iter().find(|m| m.first == first && m.second == second)
    }

    pub fn item_mean(&self, item_id: &str, dimension_id: u8) -> Option<&ItemMean> {
        self.item_means.iter().find(|m| m.item_id == item_id && m.dimension_id == dimension_id)
    }
}

impl MatchupSummary {
    pub fn dimension(&self, id: u8) -> Option<&DimensionSummary> {
        self.dimensions.iter().find(|d| d.dimension_id == id)
    }
}

fn mean(x: &[f64]) -> f64 {
    x.iter().sum::<f64>() / x.len() as f64
}

/// Sample standard deviation (n − 1 denominator); 0 for a single value.
fn sample_std(x: &[f64]) -> f64 {
    if x.len() < 2 {
        return 0.0;
    }
    let m = mean(x);
    (x.iter().map(|v| (v - m) * (v - m)).sum::<f64>() / (x.len() - 1) as f64).sqrt()
}

fn half_width(x: &[f64], method: CiMethod) -> Option<f64> {
    if x.len() < 2 {
        return None;
    }
    match method {
        CiMethod::Normal => Some(Z95 * sample_std(x) / (x.len() as f64).sqrt()),
        CiMethod::Bootstrap { resamples, seed } => {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let mut means: Vec<f64> = (0..resamples.max(1))
                .map(|_| (0..x.len()).map(|_| x[rng.random_range(0..x.len())]).sum::<f64>() / x.len() as f64)
                .collect();
            means.sort_by(f64::total_cmp);
            let at = |q: f64| means[((means.len() - 1) as f64 * q).round() as usize];
            Some((at(0.975) - at(0.025)) / 2.0)
        }
    }
}

/// Aggregates with normal-approximation intervals.
pub fn aggregate(ratings: &[RatingRecord], items: &[StudyItem]) -> Result<Aggregate> {
    aggregate_with(ratings, items, CiMethod::Normal)
}

pub fn aggregate_with(ratings: &[RatingRecord], items: &[StudyItem], ci: CiMethod) -> Result<Aggregate> {
    if ratings.is_empty() {
        return Err(StudyError::Domain("no ratings to aggregate".into()));
    }
    let index: HashMap<&str, usize> = items.iter().enumerate().map(|(i, it)| (it.item_id.as_str(), i)).collect();
    // Integer sums are exact, so arrival order cannot change any mean.
    let mut sums: BTreeMap<(usize, u8), (i64, usize)> = BTreeMap::new();
    for r in ratings {
        let &i = index
            .get(r.item_id.as_str())
            .ok_or_else(|| StudyError::Domain(format!("rating refers to unknown item {:?}", r.item_id)))?;
        let e = sums.entry((i, r.dimension_id)).or_default();
        e.0 += i64::from(r.value);
        e.1 += 1;
    }

    let mut item_means = Vec::with_capacity(sums.len());
    let mut groups: BTreeMap<(String, String), BTreeMap<u8, Vec<f64>>> = BTreeMap::new();
    for (&(i, dim), &(sum, n)) in &sums {
        let item = &items[i];
        let (first, second) = item.canonical_pair();
        let m = item.orientation() * sum as f64 / n as f64;
        groups.entry((first.to_string(), second.to_string())).or_default().entry(dim).or_default().push(m);
        item_means.push(ItemMean {
            item_id: item.item_id.clone(),
            sample_id: item.sample_id.clone(),
            first: first.to_string(),
            second: second.to_string(),
            dimension_id: dim,
            mean: m,
            n_ratings: n,
        });
    }

    let matchups = groups
        .into_iter()
        .map(|((first, second), dims)| MatchupSummary {
            first,
            second,
            dimensions: dims
                .into_iter()
                .map(|(dimension_id, m)| DimensionSummary {
                    dimension_id,
                    mean: mean(&m),
                    ci95: half_width(&m, ci),
                    n_items: m.len(),
                })
                .collect(),
        })
        .collect();
    Ok(Aggregate { item_means, matchups })
}

/// Automatic metric score per system, then per sample.
pub type MetricScores = BTreeMap<String, BTreeMap<String, f64>>;

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaRow {
    pub item_id: String,
    pub sample_id: String,
    pub first: String,
    pub second: String,
    /// Mean human preference, positive favouring `second`.
    pub human: f64,
    /// metric(second) − metric(first).
    pub metric: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Exclusion {
    pub item_id: String,
    pub reason: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DeltaExport {
    pub dimension_id: u8,
    pub rows: Vec<DeltaRow>,
    pub exclusions: Vec<Exclusion>,
}

impl DeltaExport {
    /// (human, metric) columns ready for correlation.
    pub fn columns(&self) -> (Vec<f64>, Vec<f64>) {
        self.rows.iter().map(|r| (r.human, r.metric)).unzip()
    }
}

/// Pairs each rated item's human preference on `dimension_id` with the
/// difference of the two systems' metric scores on its sample.
pub fn export_deltas(agg: &Aggregate, dimension_id: u8, scores: &MetricScores) -> DeltaExport {
    let mut rows = Vec::new();
    let mut exclusions = Vec::new();
    let lookup = |system: &str, sample: &str| scores.get(system).and_then(|s| s.get(sample)).copied();
    for m in agg.item_means.iter().filter(|m| m.dimension_id == dimension_id) {
        match (lookup(&m.first, &m.sample_id), lookup(&m.second, &m.sample_id)) {
            (Some(a), Some(b)) if a.is_finite() && b.is_finite() => rows.push(DeltaRow {
                item_id: m.item_id.clone(),
                sample_id: m.sample_id.clone(),
                first: m.first.clone(),
                second: m.second.clone(),
                human: m.mean,
                metric: b - a,
            }),
            (a, b) => {
                let missing: Vec<&str> = [(a, &m.first), (b, &m.second)]
                    .into_iter()
                    .filter(|(v, _)| !v.is_some_and(f64::is_finite))
                    .map(|(_, s)| s.as_str())
                    .collect();
                exclusions.push(Exclusion {
                    item_id: m.item_id.clone(),
                    reason: format!("no finite metric score for {} on sample {}", missing.join(", "), m.sample_id),
                });
            }
        }
    }
    DeltaExport { dimension_id, rows, exclusions }
}
