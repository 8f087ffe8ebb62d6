//! Corpus record types.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::qa::QaFlagSet;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Part {
    Naturalistic,
    Improvised,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Dev,
    Test,
    Private,
}

/// Dyad relationship: the fine-grained familiar categories plus strangers.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Relationship {
    #[serde(rename = "friends")]
    Friends,
    #[serde(rename = "coworkers")]
    Coworkers,
    #[serde(rename = "family-generic")]
    FamilyGeneric,
    #[serde(rename = "familiar-generic")]
    FamiliarGeneric,
    #[serde(rename = "romantic")]
    Romantic,
    #[serde(rename = "classmates")]
    Classmates,
    #[serde(rename = "siblings")]
    Siblings,
    #[serde(rename = "parent/child")]
    ParentChild,
    #[serde(rename = "neighbors")]
    Neighbors,
    #[serde(rename = "roommates")]
    Roommates,
    #[serde(rename = "stranger")]
    Stranger,
}

impl Relationship {
    pub const ALL: [Relationship; 11] = [
        Self::Friends,
        Self::Coworkers,
        Self::FamilyGeneric,
        Self::FamiliarGeneric,
        Self::Romantic,
        Self::Classmates,
        Self::Siblings,
        Self::ParentChild,
        Self::Neighbors,
        Self::Roommates,
        Self::Stranger,
    ];

    pub fn is_familiar(self) -> bool {
        self != Self::Stranger
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum InteractionType {
    IpcConversation,
    LanguageGesture,
    CollaborativeStorytelling,
    SilentCharades,
}

/// One of the eight regions of the interpersonal circumplex. The code reads
/// `A` + agency level then `C` + communion level, where `P` is high, `N` is
/// low and `M` is moderate: `APCM` is high agency with moderate communion.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum IpcOctant {
    #[serde(rename = "APCM")]
    Apcm,
    #[serde(rename = "ANCM")]
    Ancm,
    #[serde(rename = "AMCP")]
    Amcp,
    #[serde(rename = "AMCN")]
    Amcn,
    #[serde(rename = "APCP")]
    Apcp,
    #[serde(rename = "APCN")]
    Apcn,
    #[serde(rename = "ANCN")]
    Ancn,
    #[serde(rename = "ANCP")]
    Ancp,
}

impl IpcOctant {
    pub const CODES: [&'static str; 8] = [
        "APCM", "ANCM", "AMCP", "AMCN", "APCP", "APCN", "ANCN", "ANCP",
    ];
    pub const ALL: [IpcOctant; 8] = [
        Self::Apcm,
        Self::Ancm,
        Self::Amcp,
        Self::Amcn,
        Self::Apcp,
        Self::Apcn,
        Self::Ancn,
        Self::Ancp,
    ];

    pub fn code(self) -> &'static str {
        Self::CODES[Self::ALL.iter().position(|&o| o == self).expect("listed")]
    }

    pub fn from_code(code: &str) -> Option<Self> {
        Self::CODES
            .iter()
            .position(|&c| c == code)
            .map(|i| Self::ALL[i])
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum AnnotationKind {
    /// First-party internal state.
    #[serde(rename = "1P-IS")]
    FirstPartyInternalState,
    /// First-party internal state rationale.
    #[serde(rename = "1P-R")]
    FirstPartyRationale,
    #[serde(rename = "3P-IS")]
    ThirdPartyInternalState,
    #[serde(rename = "3P-R")]
    ThirdPartyRationale,
    /// Third-party visual elements.
    #[serde(rename = "3P-V")]
    ThirdPartyVisual,
}

/// A moment-of-interest annotation inside an interaction.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnnotationRecord {
    pub moi_start_s: f64,
    pub moi_end_s: f64,
    pub kind: AnnotationKind,
    pub text: String,
    pub target_participant: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct InteractionRecord {
    pub interaction_id: String,
    pub session_id: String,
    pub participant_a: String,
    pub participant_b: String,
    pub part: Part,
    pub split: Split,
    pub relationship: Relationship,
    pub interaction_type: InteractionType,
    #[serde(default)]
    pub prompt_a: String,
    #[serde(default)]
    pub prompt_b: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ipc_a: Option<IpcOctant>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ipc_b: Option<IpcOctant>,
    pub duration_s: f64,
    #[serde(default)]
    pub feature_refs: BTreeMap<String, String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub annotations: Vec<AnnotationRecord>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub qa: Vec<QaFlagSet>,
    /// Fields this version does not know about, kept verbatim.
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}

impl InteractionRecord {
    pub fn participants(&self) -> [&str; 2] {
        [&self.participant_a, &self.participant_b]
    }
}

/// Participant metadata. BFI-2 scores are ordered extraversion,
/// agreeableness, conscientiousness, negative emotionality, open-mindedness.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Participant {
    pub participant_id: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub bfi2: Option<[f64; 5]>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub demographics: BTreeMap<String, Value>,
    #[serde(flatten)]
    pub extra: BTreeMap<String, Value>,
}
