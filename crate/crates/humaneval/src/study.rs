//! In-memory study state rebuilt from events.
//!
//! Assignment policy: a rater is always served an item they have not seen,
//! chosen among the items with the fewest completed plus outstanding
//! ratings (lowest index on ties). An outstanding assignment counts towards
//! the per-item cap, so concurrent raters never push an item past it. A flag
//! withdraws that rater's judgement of the item and frees the slot for
//! someone else; an item flagged by `withdraw_after_flags` raters is
//! withdrawn from the study.

use std::collections::{BTreeMap, BTreeSet, HashMap, HashSet};

use serde::{Deserialize, Serialize};

use crate::events::{Event, FlagRecord, RatingRecord};
use crate::items::StudyItem;
use crate::protocol::{FlagCategory, Protocol, SCALE_MAX, SCALE_MIN};
use crate::{Result, StudyError};

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct StudyConfig {
    pub study_id: String,
    pub protocol: Protocol,
    pub ratings_per_item: usize,
    /// Distinct flagging raters after which an item leaves the study.
    pub withdraw_after_flags: usize,
    /// Seed the item layout was built with.
    pub seed: u64,
}

impl StudyConfig {
    pub fn new(study_id: impl Into<String>, protocol: Protocol, seed: u64) -> Self {
        Self { study_id: study_id.into(), protocol, ratings_per_item: 5, withdraw_after_flags: 3, seed }
    }
}

/// A rating that replaced an earlier one for the same key.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct AuditEntry {
    pub previous: RatingRecord,
    pub replacement: RatingRecord,
}

type RatingKey = (usize, String, u8);

#[derive(Clone, Debug)]
pub struct Study {
    config: StudyConfig,
    items: Vec<StudyItem>,
    index: HashMap<String, usize>,
    raters: BTreeSet<String>,
    ratings: BTreeMap<RatingKey, RatingRecord>,
    audit: Vec<AuditEntry>,
    flags: Vec<FlagRecord>,
    /// (item, rater) pairs whose judgement is withdrawn.
    flagged: HashSet<(usize, String)>,
    flag_count: Vec<usize>,
    withdrawn: Vec<bool>,
    /// Raters holding a complete set of dimensions, per item.
    completed: Vec<BTreeSet<String>>,
    /// Items each rater has been served, rated or flagged.
    touched: HashMap<String, HashSet<usize>>,
    /// Outstanding assignment per rater.
    assigned: HashMap<String, usize>,
    pending: Vec<usize>,
}

impl Study {
    pub fn new(config: StudyConfig, items: Vec<StudyItem>) -> Result<Self> {
        if config.ratings_per_item == 0 || config.withdraw_after_flags == 0 {
            return Err(StudyError::Config("ratings_per_item and withdraw_after_flags must be positive".into()));
        }
        let mut index = HashMap::with_capacity(items.len());
        for (i, item) in items.iter().enumerate() {
            if item.protocol != config.protocol {
                return Err(StudyError::Config(format!("item {} belongs to another protocol", item.item_id)));
            }
            if item.system_left == item.system_right {
                return Err(StudyError::Config(format!("item {} compares a system with itself", item.item_id)));
            }
            if index.insert(item.item_id.clone(), i).is_some() {
                return Err(StudyError::Config(format!("duplicate item id {}", item.item_id)));
            }
        }
        let n = items.len();
        Ok(Self {
            config,
            items,
            index,
            raters: BTreeSet::new(),
            ratings: BTreeMap::new(),
            audit: Vec::new(),
            flags: Vec::new(),
            flagged: HashSet::new(),
            flag_count: vec![0; n],
            withdrawn: vec![false; n],
            completed: vec![BTreeSet::new(); n],
            touched: HashMap::new(),
            assigned: HashMap::new(),
            pending: vec![0; n],
        })
    }

    /// Rebuilds a study from its full event log.
    pub fn replay(events: &[Event]) -> Result<Self> {
        let Some(Event::StudyCreated { config, items, .. }) = events.first() else {
            return Err(StudyError::Validation("event log must start with study_created".into()));
        };
        let mut study = Self::new(config.clone(), items.clone())?;
        for event in &events[1..] {
            study.apply(event)?;
        }
        Ok(study)
    }

    pub fn config(&self) -> &StudyConfig {
        &self.config
    }

    pub fn items(&self) -> &[StudyItem] {
        &self.items
    }

    pub fn item(&self, item_id: &str) -> Option<&StudyItem> {
        self.index.get(item_id).map(|&i| &self.items[i])
    }

    pub fn raters(&self) -> &BTreeSet<String> {
        &self.raters
    }

    pub fn audit(&self) -> &[AuditEntry] {
        &self.audit
    }

    pub fn flags(&self) -> &[FlagRecord] {
        &self.flags
    }

    pub fn is_withdrawn(&self, item_id: &str) -> bool {
        self.index.get(item_id).is_some_and(|&i| self.withdrawn[i])
    }

    /// Raters with a complete, unflagged set of ratings for the item.
    pub fn completed_ratings(&self, item_id: &str) -> usize {
        self.index.get(item_id).map_or(0, |&i| self.completed[i].len())
    }

    /// Whether every active item has its full quota of ratings.
    pub fn is_complete(&self) -> bool {
        (0..self.items.len()).all(|i| self.withdrawn[i] || self.completed[i].len() >= self.config.ratings_per_item)
    }

    /// Current ratings that count towards aggregation, in key order.
    pub fn effective_ratings(&self) -> Vec<RatingRecord> {
        self.ratings
            .iter()
            .filter(|((i, rater, _), _)| !self.withdrawn[*i] && !self.flagged.contains(&(*i, rater.clone())))
            .map(|(_, r)| r.clone())
            .collect()
    }

    /// Every current rating, flagged or not.
    pub fn all_ratings(&self) -> impl Iterator<Item = &RatingRecord> {
        self.ratings.values()
    }

    fn item_index(&self, item_id: &str) -> Result<usize> {
        self.index.get(item_id).copied().ok_or_else(|| StudyError::NotFound(format!("item {item_id:?}")))
    }

    fn require_rater(&self, rater_id: &str) -> Result<()> {
        if self.raters.contains(rater_id) {
            Ok(())
        } else {
            Err(StudyError::Auth(format!("unknown rater {rater_id:?}")))
        }
    }

    fn check_flags(categories: &BTreeSet<FlagCategory>, note: Option<&str>) -> Result<()> {
        if categories.contains(&FlagCategory::Other) && note.is_none_or(|n| n.trim().is_empty()) {
            return Err(StudyError::Validation("flag category \"other\" requires a justification note".into()));
        }
        Ok(())
    }

    /// Checks an event against the current state without applying it.
    pub fn validate(&self, event: &Event) -> Result<()> {
        match event {
            Event::StudyCreated { .. } => Err(StudyError::Validation("study already created".into())),
            Event::RaterRegistered { rater_id, .. } => {
                if rater_id.trim().is_empty() {
                    Err(StudyError::Validation("rater id must not be empty".into()))
                } else {
                    Ok(())
                }
            }
            Event::Rating(r) => {
                self.require_rater(&r.rater_id)?;
                let i = self.item_index(&r.item_id)?;
                if !(SCALE_MIN..=SCALE_MAX).contains(&r.value) {
                    return Err(StudyError::Validation(format!("rating value {} outside {SCALE_MIN}..={SCALE_MAX}", r.value)));
                }
                if self.config.protocol.dimension(r.dimension_id).is_none() {
                    return Err(StudyError::Validation(format!(
                        "dimension {} not in the {:?} protocol",
                        r.dimension_id, self.config.protocol
                    )));
                }
                Self::check_flags(&r.flags, None)?;
                if self.withdrawn[i] {
                    return Err(StudyError::Validation(format!("item {} has been withdrawn", r.item_id)));
                }
                if self.flagged.contains(&(i, r.rater_id.clone())) {
                    return Err(StudyError::Validation(format!("item {} was flagged by this rater", r.item_id)));
                }
                Ok(())
            }
            Event::Flag(f) => {
                self.require_rater(&f.rater_id)?;
                self.item_index(&f.item_id)?;
                if f.categories.is_empty() {
                    return Err(StudyError::Validation("a flag needs at least one category".into()));
                }
                Self::check_flags(&f.categories, f.note.as_deref())
            }
        }
    }

    /// Validates and applies one event.
    pub fn apply(&mut self, event: &Event) -> Result<()> {
        self.validate(event)?;
        match event {
            Event::StudyCreated { .. } => unreachable!("rejected by validate"),
            Event::RaterRegistered { rater_id, .. } => {
                self.raters.insert(rater_id.clone());
            }
            Event::Rating(r) => self.apply_rating(r),
            Event::Flag(f) => self.apply_flag(f),
        }
        Ok(())
    }

    fn apply_rating(&mut self, r: &RatingRecord) {
        let i = self.index[&r.item_id];
        self.touched.entry(r.rater_id.clone()).or_default().insert(i);
        let key = (i, r.rater_id.clone(), r.dimension_id);
        if let Some(previous) = self.ratings.insert(key, r.clone()) {
            self.audit.push(AuditEntry { previous, replacement: r.clone() });
        }
        if !r.flags.is_empty() {
            self.withdraw_judgement(i, &r.rater_id);
            return;
        }
        let dims = self.config.protocol.dimensions();
        let done = dims.iter().all(|d| self.ratings.contains_key(&(i, r.rater_id.clone(), d.id)));
        if done && self.completed[i].insert(r.rater_id.clone()) {
            self.release(&r.rater_id, i);
        }
    }

    fn apply_flag(&mut self, f: &FlagRecord) {
        let i = self.index[&f.item_id];
        self.flags.push(f.clone());
        self.touched.entry(f.rater_id.clone()).or_default().insert(i);
        self.withdraw_judgement(i, &f.rater_id);
    }

    fn withdraw_judgement(&mut self, i: usize, rater: &str) {
        if self.flagged.insert((i, rater.to_string())) {
            self.flag_count[i] += 1;
            if self.flag_count[i] >= self.config.withdraw_after_flags {
                self.withdrawn[i] = true;
            }
        }
        self.completed[i].remove(rater);
        self.release(rater, i);
    }

    fn release(&mut self, rater: &str, i: usize) {
        if self.assigned.get(rater) == Some(&i) {
            self.assigned.remove(rater);
            self.pending[i] -= 1;
        }
    }

    fn load(&self, i: usize) -> usize {
        self.completed[i].len() + self.pending[i]
    }

    /// Serves the next item to `rater_id`, or `None` when nothing is left
    /// for them. A rater with an outstanding item gets that item again.
    pub fn next_item(&mut self, rater_id: &str) -> Result<Option<StudyItem>> {
        self.require_rater(rater_id)?;
        if let Some(&i) = self.assigned.get(rater_id) {
            if !self.withdrawn[i] {
                return Ok(Some(self.items[i].clone()));
            }
            self.assigned.remove(rater_id);
            self.pending[i] -= 1;
        }
        let seen = self.touched.get(rater_id);
        let cap = self.config.ratings_per_item;
        let pick = (0..self.items.len())
            .filter(|&i| !self.withdrawn[i] && self.load(i) < cap && !seen.is_some_and(|s| s.contains(&i)))
            .min_by_key(|&i| (self.load(i), i));
        let Some(i) = pick else { return Ok(None) };
        self.assigned.insert(rater_id.to_string(), i);
        self.pending[i] += 1;
        self.touched.entry(rater_id.to_string()).or_default().insert(i);
        Ok(Some(self.items[i].clone()))
    }
}
