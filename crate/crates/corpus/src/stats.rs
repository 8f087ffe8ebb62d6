//! Corpus statistics with the row structure of the reference volume tables.

use std::collections::{BTreeMap, BTreeSet};

use serde::{Serialize, Serializer};

use crate::records::{InteractionRecord, InteractionType, Part, Relationship, Split};
use crate::CorpusManifest;

/// One table row. Sessions, participants and prompts are kept as sets so
/// rows from disjoint manifests merge exactly.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct StatsRow {
    pub seconds: f64,
    pub interactions: usize,
    pub sessions: BTreeSet<String>,
    pub participants: BTreeSet<String>,
    pub prompts: BTreeSet<String>,
}

impl StatsRow {
    pub fn hours(&self) -> f64 {
        self.seconds / 3600.0
    }

    fn add(&mut self, r: &InteractionRecord) {
        self.seconds += r.duration_s;
        self.interactions += 1;
        self.sessions.insert(r.session_id.clone());
        for p in r.participants() {
            self.participants.insert(p.to_owned());
        }
        for prompt in [&r.prompt_a, &r.prompt_b] {
            if !prompt.is_empty() {
                self.prompts.insert(prompt.clone());
            }
        }
    }

    pub fn merge(&mut self, other: &StatsRow) {
        self.seconds += other.seconds;
        self.interactions += other.interactions;
        self.sessions.extend(other.sessions.iter().cloned());
        self.participants.extend(other.participants.iter().cloned());
        self.prompts.extend(other.prompts.iter().cloned());
    }

    pub fn counts(&self) -> RowCounts {
        RowCounts {
            hours: self.hours(),
            interactions: self.interactions,
            sessions: self.sessions.len(),
            participants: self.participants.len(),
            prompts: self.prompts.len(),
        }
    }
}

impl Serialize for StatsRow {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        self.counts().serialize(s)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize)]
pub struct RowCounts {
    pub hours: f64,
    pub interactions: usize,
    pub sessions: usize,
    pub participants: usize,
    pub prompts: usize,
}

#[derive(Clone, Debug, Default, PartialEq, Serialize)]
pub struct CorpusStats {
    pub overall: StatsRow,
    pub by_part: BTreeMap<Part, StatsRow>,
    pub by_split: BTreeMap<Split, StatsRow>,
    pub by_relationship: BTreeMap<Relationship, StatsRow>,
    pub by_interaction_type: BTreeMap<InteractionType, StatsRow>,
    /// Naturalistic part split into familiar and stranger dyads.
    pub naturalistic_by_familiarity: BTreeMap<&'static str, StatsRow>,
}

impl CorpusStats {
    pub fn merge(&mut self, other: &CorpusStats) {
        fn merge_map<K: Ord + Clone>(a: &mut BTreeMap<K, StatsRow>, b: &BTreeMap<K, StatsRow>) {
            for (k, v) in b {
                a.entry(k.clone()).or_default().merge(v);
            }
        }
        self.overall.merge(&other.overall);
        merge_map(&mut self.by_part, &other.by_part);
        merge_map(&mut self.by_split, &other.by_split);
        merge_map(&mut self.by_relationship, &other.by_relationship);
        merge_map(&mut self.by_interaction_type, &other.by_interaction_type);
        merge_map(
            &mut self.naturalistic_by_familiarity,
            &other.naturalistic_by_familiarity,
        );
    }

    /// Aligned text rendering of every table.
    pub fn render(&self) -> String {
        let mut out = String::new();
        let header = format!(
            "{:<28} {:>10} {:>12} {:>9} {:>12} {:>8}\n",
            "", "Hours", "Interactions", "Sessions", "Participants", "Prompts"
        );
        let line = |label: &str, r: &StatsRow| {
            let c = r.counts();
            format!(
                "{:<28} {:>10.2} {:>12} {:>9} {:>12} {:>8}\n",
                label, c.hours, c.interactions, c.sessions, c.participants, c.prompts
            )
        };
        out += &header;
        out += &line("Overall", &self.overall);
        for (k, v) in &self.by_part {
            out += &line(&format!("{k:?}"), v);
        }
        let mut section = |title: &str, rows: Vec<(String, &StatsRow)>| {
            out += &format!("\n{title}\n");
            out += &header;
            for (k, v) in rows {
                out += &line(&k, v);
            }
        };
        section(
            "By interaction type",
            self.by_interaction_type.iter().map(|(k, v)| (format!("{k:?}"), v)).collect(),
        );
        section(
            "Naturalistic by familiarity",
            self.naturalistic_by_familiarity.iter().map(|(k, v)| (k.to_string(), v)).collect(),
        );
        section(
            "By relationship",
            self.by_relationship.iter().map(|(k, v)| (format!("{k:?}"), v)).collect(),
        );
        section(
            "By split",
            self.by_split.iter().map(|(k, v)| (format!("{k:?}"), v)).collect(),
        );
        out
    }
}

pub fn compute_stats(m: &CorpusManifest) -> CorpusStats {
    let mut s = CorpusStats::default();
    for r in &m.records {
        s.overall.add(r);
        s.by_part.entry(r.part).or_default().add(r);
        s.by_split.entry(r.split).or_default().add(r);
        s.by_relationship.entry(r.relationship).or_default().add(r);
        s.by_interaction_type.entry(r.interaction_type).or_default().add(r);
        if r.part == Part::Naturalistic {
            let key = if r.relationship.is_familiar() { "familiar" } else { "stranger" };
            s.naturalistic_by_familiarity.entry(key).or_default().add(r);
        }
    }
    s
}

/// Reported volumes of the full corpus, kept as ingested reference
/// metadata: (hours, interactions, sessions, participants, prompts).
pub mod reported {
    pub type Row = (f64, usize, usize, usize, usize);

    pub const OVERALL: Row = (4065.04, 64_739, 5_098, 4_284, 1_283);
    pub const NATURALISTIC: Row = (2745.43, 47_333, 3_363, 3_525, 675);
    pub const IMPROVISED: Row = (1319.61, 17_406, 1_735, 1_011, 845);

    pub const IPC_CONVERSATION: Row = (3464.16, 53_938, 5_098, 4_284, 953);
    pub const LANGUAGE_GESTURE: Row = (379.12, 6_364, 3_465, 3_702, 296);
    pub const COLLABORATIVE_STORYTELLING: Row = (146.89, 2_845, 2_844, 3_105, 1);
    pub const SILENT_CHARADES: Row = (74.87, 1_592, 1_592, 1_910, 1);
}
