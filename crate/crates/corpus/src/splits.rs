//! Participant-level split leakage checks.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Deserialize, Serialize};

use crate::records::{Part, Split};
use crate::CorpusManifest;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitViolation {
    pub participant: String,
    pub part: Part,
    pub splits: Vec<Split>,
}

#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitReport {
    pub violations: Vec<SplitViolation>,
}

impl SplitReport {
    pub fn passed(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Lists every participant who appears in more than one split within the
/// same part. Appearing in different parts is allowed.
pub fn validate_splits(m: &CorpusManifest) -> SplitReport {
    let mut seen: BTreeMap<(&str, Part), BTreeSet<Split>> = BTreeMap::new();
    for r in &m.records {
        for p in r.participants() {
            seen.entry((p, r.part)).or_default().insert(r.split);
        }
    }
    SplitReport {
        violations: seen
            .into_iter()
            .filter(|(_, s)| s.len() > 1)
            .map(|((p, part), s)| SplitViolation {
                participant: p.to_owned(),
                part,
                splits: s.into_iter().collect(),
            })
            .collect(),
    }
}
