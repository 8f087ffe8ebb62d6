//! Thread-safe study handle: validated writes go to the log, then to state.

use std::path::Path;
use std::sync::{Mutex, RwLock};

use crate::aggregate::{aggregate, Aggregate};
use crate::events::{Event, EventLog, FlagRecord, RatingRecord};
use crate::items::StudyItem;
use crate::study::{Study, StudyConfig};
use crate::{Result, StudyError};

#[derive(Debug)]
pub struct StudyService {
    study: RwLock<Study>,
    log: Mutex<Option<EventLog>>,
}

impl StudyService {
    /// A study with no persistence, for tests and dry runs.
    pub fn in_memory(study: Study) -> Self {
        Self { study: RwLock::new(study), log: Mutex::new(None) }
    }

    /// Creates a new study and its log file.
    pub fn create(path: impl AsRef<Path>, config: StudyConfig, items: Vec<StudyItem>) -> Result<Self> {
        let log = EventLog::create(path, &config, &items)?;
        let study = Study::new(config, items)?;
        Ok(Self { study: RwLock::new(study), log: Mutex::new(Some(log)) })
    }

    /// Reopens a study by replaying its log.
    pub fn open(path: impl AsRef<Path>) -> Result<Self> {
        let (log, events) = EventLog::open(path)?;
        let study = Study::replay(&events)?;
        Ok(Self { study: RwLock::new(study), log: Mutex::new(Some(log)) })
    }

    pub fn study_id(&self) -> String {
        self.read(|s| s.config().study_id.clone())
    }

    /// Runs `f` on a shared view of the state.
    pub fn read<T>(&self, f: impl FnOnce(&Study) -> T) -> T {
        f(&self.study.read().unwrap_or_else(|e| e.into_inner()))
    }

    /// Validates every event, then persists and applies them in order.
    /// Nothing is written if any event is invalid.
    pub fn submit(&self, events: &[Event]) -> Result<()> {
        let mut study = self.study.write().unwrap_or_else(|e| e.into_inner());
        for e in events {
            study.validate(e)?;
        }
        let mut log = self.log.lock().unwrap_or_else(|e| e.into_inner());
        for e in events {
            if let Some(log) = log.as_mut() {
                log.append(e)?;
            }
            study.apply(e)?;
        }
        Ok(())
    }

    /// Registers a rater; registering twice is a no-op.
    pub fn register(&self, rater_id: &str, timestamp: u64) -> Result<()> {
        if self.read(|s| s.raters().contains(rater_id)) {
            return Ok(());
        }
        self.submit(&[Event::RaterRegistered { rater_id: rater_id.to_string(), timestamp }])
    }

    pub fn record_ratings(&self, records: Vec<RatingRecord>) -> Result<usize> {
        let n = records.len();
        if n == 0 {
            return Err(StudyError::Validation("no rating records".into()));
        }
        self.submit(&records.into_iter().map(Event::Rating).collect::<Vec<_>>())?;
        Ok(n)
    }

    pub fn record_flag(&self, flag: FlagRecord) -> Result<()> {
        self.submit(&[Event::Flag(flag)])
    }

    pub fn next_item(&self, rater_id: &str) -> Result<Option<StudyItem>> {
        self.study.write().unwrap_or_else(|e| e.into_inner()).next_item(rater_id)
    }

    /// Aggregate over the ratings that currently count.
    pub fn results(&self) -> Result<Aggregate> {
        let (ratings, items) = self.read(|s| (s.effective_ratings(), s.items().to_vec()));
        aggregate(&ratings, &items)
    }
}
