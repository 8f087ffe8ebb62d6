//! Ablation report tables: one row per system, mean ± std over runs.

use std::fmt::Write as _;

use dyadic_tensor::Matrix;
use serde::{Deserialize, Serialize};

/// Column order of the ablation table.
pub const COLUMNS: [&str; 6] = ["FFD", "Sync-C", "Sync-D", "FID", "FGD", "Diversity"];

/// An evaluation metric over generated and reference sequences. Metrics
/// that need pretrained networks are plugged in from outside; without one
/// the cell reads `n/a`.
pub trait MetricPlugin {
    fn name(&self) -> &str;
    fn compute(&self, generated: &[Matrix], reference: &[Matrix]) -> Option<f64>;
}

/// Placeholder for a metric whose network is not available.
#[derive(Clone, Debug)]
pub struct UnavailableMetric(pub String);

impl MetricPlugin for UnavailableMetric {
    fn name(&self) -> &str {
        &self.0
    }

    fn compute(&self, _: &[Matrix], _: &[Matrix]) -> Option<f64> {
        None
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MeanStd {
    pub mean: f64,
    /// Sample standard deviation over runs; zero for a single run.
    pub std: f64,
    pub runs: usize,
}

impl MeanStd {
    pub fn from_runs(values: &[f64]) -> Option<Self> {
        if values.is_empty() {
            return None;
        }
        let n = values.len() as f64;
        let mean = values.iter().sum::<f64>() / n;
        let std = if values.len() > 1 {
            (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
        } else {
            0.0
        };
        Some(Self {
            mean,
            std,
            runs: values.len(),
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TableRow {
    pub system: String,
    pub conditions: String,
    /// One cell per entry of [`COLUMNS`].
    pub cells: Vec<Option<MeanStd>>,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct MetricTable {
    pub title: String,
    pub rows: Vec<TableRow>,
}

impl MetricTable {
    pub fn new(title: &str) -> Self {
        Self {
            title: title.into(),
            rows: Vec::new(),
        }
    }

    /// Adds a row from per-run values keyed by column name; columns with
    /// no values render as `n/a`.
    pub fn push(&mut self, system: &str, conditions: &str, runs: &[(&str, Vec<f64>)]) {
        let cells = COLUMNS
            .iter()
            .map(|c| {
                runs.iter()
                    .find(|(name, _)| name == c)
                    .and_then(|(_, v)| MeanStd::from_runs(v))
            })
            .collect();
        self.rows.push(TableRow {
            system: system.into(),
            conditions: conditions.into(),
            cells,
        });
    }

    /// Plain-text table with aligned columns.
    pub fn render(&self) -> String {
        let mut header = vec!["System".to_string(), "Conditions".to_string()];
        header.extend(COLUMNS.iter().map(|c| c.to_string()));
        let mut lines = vec![header];
        for r in &self.rows {
            let mut line = vec![r.system.clone(), r.conditions.clone()];
            line.extend(r.cells.iter().map(|c| match c {
                Some(m) => format!("{:.3} ± {:.3}", m.mean, m.std),
                None => "n/a".into(),
            }));
            lines.push(line);
        }
        let widths: Vec<usize> = (0..lines[0].len())
            .map(|i| lines.iter().map(|l| l[i].chars().count()).max().unwrap_or(0))
            .collect();
        let mut out = String::new();
        if !self.title.is_empty() {
            let _ = writeln!(out, "{}", self.title);
        }
        for (k, l) in lines.iter().enumerate() {
            let cells: Vec<String> = l
                .iter()
                .zip(&widths)
                .map(|(c, w)| format!("{c}{}", " ".repeat(w - c.chars().count())))
                .collect();
            let _ = writeln!(out, "{}", cells.join("  ").trim_end());
            if k == 0 {
                let _ = writeln!(out, "{}", "-".repeat(widths.iter().sum::<usize>() + 2 * (widths.len() - 1)));
            }
        }
        out
    }
}
