//! Pairwise study items.
//!
//! Each test sample is shown once for every unordered pair of systems. The
//! side each system appears on is drawn per item from a seed that is stored
//! on the item, so the raw left/right layout can always be reconstructed.

use std::collections::{BTreeMap, BTreeSet};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::protocol::Protocol;
use crate::{Result, StudyError};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Speaker {
    Anchor,
    Candidate,
}

/// A voice-activity interval used to highlight the current speaker's label.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VadSegment {
    pub speaker: Speaker,
    pub start_s: f64,
    pub end_s: f64,
}

/// One test sample and the rendered candidate clip of every system.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SampleMedia {
    pub sample_id: String,
    /// Ground-truth footage of the anchor participant.
    pub anchor: String,
    /// Candidate clip per system id.
    pub candidates: BTreeMap<String, String>,
    #[serde(default)]
    pub vad_segments: Vec<VadSegment>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyItem {
    pub item_id: String,
    pub sample_id: String,
    pub protocol: Protocol,
    pub system_left: String,
    pub system_right: String,
    pub anchor: String,
    pub candidate_left: String,
    pub candidate_right: String,
    pub vad_segments: Vec<VadSegment>,
    /// Seed that decided the left/right layout.
    pub layout_seed: u64,
}

impl StudyItem {
    /// The system pair in lexicographic order.
    pub fn canonical_pair(&self) -> (&str, &str) {
        if self.system_left <= self.system_right {
            (&self.system_left, &self.system_right)
        } else {
            (&self.system_right, &self.system_left)
        }
    }

    /// +1 when the right-hand system is the lexicographically later one,
    /// else −1. Multiplying a raw rating by this gives a value where
    /// positive favours the later system of [`canonical_pair`](Self::canonical_pair).
    pub fn orientation(&self) -> f64 {
        if self.system_left <= self.system_right {
            1.0
        } else {
            -1.0
        }
    }
}

fn mix(seed: u64, index: u64) -> u64 {
    // splitmix64 finaliser over the combined input
    let mut z = seed ^ index.wrapping_mul(0x9e37_79b9_7f4a_7c15);
    z = (z ^ (z >> 30)).wrapping_mul(0xbf58_476d_1ce4_e5b9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94d0_49bb_1331_11eb);
    z ^ (z >> 31)
}

/// Whether the first system of a pair goes on the left for `layout_seed`.
pub fn first_on_left(layout_seed: u64) -> bool {
    ChaCha8Rng::seed_from_u64(layout_seed).random_bool(0.5)
}

/// One item per sample per unordered pair of `systems`.
pub fn build_items(samples: &[SampleMedia], systems: &[String], protocol: Protocol, seed: u64) -> Result<Vec<StudyItem>> {
    if systems.len() < 2 {
        return Err(StudyError::Config("a study needs at least two systems".into()));
    }
    if samples.is_empty() {
        return Err(StudyError::Config("a study needs at least one sample".into()));
    }
    let mut seen = BTreeSet::new();
    for s in systems {
        if !seen.insert(s.as_str()) {
            return Err(StudyError::Config(format!("duplicate system id {s:?}")));
        }
    }
    let mut sample_ids = BTreeSet::new();
    for sample in samples {
        if !sample_ids.insert(sample.sample_id.as_str()) {
            return Err(StudyError::Config(format!("duplicate sample id {:?}", sample.sample_id)));
        }
        if let Some(missing) = systems.iter().find(|s| !sample.candidates.contains_key(*s)) {
            return Err(StudyError::Config(format!("sample {:?} has no clip for system {missing:?}", sample.sample_id)));
        }
    }

    let mut items = Vec::with_capacity(samples.len() * systems.len() * (systems.len() - 1) / 2);
    for sample in samples {
        for i in 0..systems.len() {
            for j in i + 1..systems.len() {
                let index = items.len();
                let layout_seed = mix(seed, index as u64);
                let (left, right) =
                    if first_on_left(layout_seed) { (&systems[i], &systems[j]) } else { (&systems[j], &systems[i]) };
                items.push(StudyItem {
                    item_id: format!("item-{index:05}"),
                    sample_id: sample.sample_id.clone(),
                    protocol,
                    system_left: left.clone(),
                    system_right: right.clone(),
                    anchor: sample.anchor.clone(),
                    candidate_left: sample.candidates[left].clone(),
                    candidate_right: sample.candidates[right].clone(),
                    vad_segments: sample.vad_segments.clone(),
                    layout_seed,
                });
            }
        }
    }
    Ok(items)
}
