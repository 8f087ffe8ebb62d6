//! Merging quality-assurance flags from human and model reviewers.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::{CorpusError, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaSource {
    Human,
    TextLlm,
    Vlm,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaCategory {
    /// Personally identifiable information and other sensitive material.
    SensitiveMaterial,
    OffensiveMaterial,
    ParticipantVisibility,
    AudioComprehension,
    RecordingArtifacts,
    AudioVideoSync,
    ParticipantEngagement,
}

impl QaCategory {
    pub const ALL: [QaCategory; 7] = [
        Self::SensitiveMaterial,
        Self::OffensiveMaterial,
        Self::ParticipantVisibility,
        Self::AudioComprehension,
        Self::RecordingArtifacts,
        Self::AudioVideoSync,
        Self::ParticipantEngagement,
    ];

    /// Categories whose flags can remove an interaction outright.
    pub fn is_safety(self) -> bool {
        matches!(self, Self::SensitiveMaterial | Self::OffensiveMaterial)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum QaAnswer {
    Yes,
    No,
    Unsure,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct QaFlagSet {
    pub source: QaSource,
    pub flags: BTreeMap<QaCategory, QaAnswer>,
}

impl QaFlagSet {
    /// A flag set answering `No` everywhere.
    pub fn clean(source: QaSource) -> Self {
        Self {
            source,
            flags: QaCategory::ALL.iter().map(|&c| (c, QaAnswer::No)).collect(),
        }
    }

    pub fn with(mut self, category: QaCategory, answer: QaAnswer) -> Self {
        self.flags.insert(category, answer);
        self
    }

    pub fn check_complete(&self) -> Result<()> {
        match QaCategory::ALL.iter().find(|c| !self.flags.contains_key(c)) {
            Some(missing) => Err(CorpusError::Schema(format!(
                "{:?} flag set lacks category {missing:?}",
                self.source
            ))),
            None => Ok(()),
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Decision {
    Keep,
    Review,
    Remove,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FilterDecision {
    pub decision: Decision,
    /// The (source, category) pairs that triggered the decision.
    pub rationale: Vec<(QaSource, QaCategory)>,
}

/// Conservative merge: any source answering `Yes` on a safety category
/// removes the interaction; otherwise any `Unsure` there sends it to review.
pub fn merge_qa_flags(flags: &[QaFlagSet]) -> Result<FilterDecision> {
    if flags.is_empty() {
        return Err(CorpusError::Schema("no QA sources supplied".into()));
    }
    for f in flags {
        f.check_complete()?;
    }
    let hits = |answer: QaAnswer| -> Vec<(QaSource, QaCategory)> {
        flags
            .iter()
            .flat_map(|f| {
                f.flags
                    .iter()
                    .filter(move |(c, a)| c.is_safety() && **a == answer)
                    .map(move |(c, _)| (f.source, *c))
            })
            .collect()
    };
    let yes = hits(QaAnswer::Yes);
    if !yes.is_empty() {
        return Ok(FilterDecision {
            decision: Decision::Remove,
            rationale: yes,
        });
    }
    let unsure = hits(QaAnswer::Unsure);
    Ok(FilterDecision {
        decision: if unsure.is_empty() {
            Decision::Keep
        } else {
            Decision::Review
        },
        rationale: unsure,
    })
}
