//! Append-only event log.
//!
//! A study is persisted as one JSON object per line. The first line creates
//! the study (configuration and items); every later line is a rater
//! registration, a rating or a flag. State is always rebuilt by replaying
//! the log, so aggregates are never stored.

use std::collections::BTreeSet;
use std::fs::{File, OpenOptions};
use std::io::{BufRead, BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::items::StudyItem;
use crate::protocol::FlagCategory;
use crate::study::StudyConfig;
use crate::{Result, StudyError};

/// Version of the log line and HTTP payload schemas.
pub const SCHEMA_VERSION: u32 = 1;

/// One human judgement on one dimension of one item.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RatingRecord {
    pub item_id: String,
    pub rater_id: String,
    pub dimension_id: u8,
    /// −2 strongly prefers the left candidate, +2 the right one.
    pub value: i8,
    /// Client time in milliseconds since the Unix epoch.
    #[serde(default)]
    pub timestamp: u64,
    /// Problems noticed while rating. A non-empty set withdraws the rater's
    /// judgement of this item like a flag does.
    #[serde(default, skip_serializing_if = "BTreeSet::is_empty")]
    pub flags: BTreeSet<FlagCategory>,
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct FlagRecord {
    pub item_id: String,
    pub rater_id: String,
    pub categories: BTreeSet<FlagCategory>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub note: Option<String>,
    #[serde(default)]
    pub timestamp: u64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "event", rename_all = "snake_case")]
pub enum Event {
    StudyCreated { schema_version: u32, config: StudyConfig, items: Vec<StudyItem> },
    RaterRegistered { rater_id: String, #[serde(default)] timestamp: u64 },
    Rating(RatingRecord),
    Flag(FlagRecord),
}

/// Single-writer handle on a log file.
#[derive(Debug)]
pub struct EventLog {
    path: PathBuf,
    out: BufWriter<File>,
}

impl EventLog {
    /// Starts a new log with its creation event. Fails if the file exists.
    pub fn create(path: impl AsRef<Path>, config: &StudyConfig, items: &[StudyItem]) -> Result<Self> {
        let path = path.as_ref().to_path_buf();
        let file = OpenOptions::new().write(true).create_new(true).open(&path)?;
        let mut log = Self { path, out: BufWriter::new(file) };
        log.append(&Event::StudyCreated { schema_version: SCHEMA_VERSION, config: config.clone(), items: items.to_vec() })?;
        Ok(log)
    }

    /// Opens an existing log for appending and returns its events.
    pub fn open(path: impl AsRef<Path>) -> Result<(Self, Vec<Event>)> {
        let path = path.as_ref().to_path_buf();
        let events = read_events(&path)?;
        let file = OpenOptions::new().append(true).open(&path)?;
        Ok((Self { path, out: BufWriter::new(file) }, events))
    }

    pub fn path(&self) -> &Path {
        &self.path
    }

    /// Writes one line and flushes it to the OS before returning.
    pub fn append(&mut self, event: &Event) -> Result<()> {
        serde_json::to_writer(&mut self.out, event)?;
        self.out.write_all(b"\n")?;
        self.out.flush()?;
        Ok(())
    }
}

/// Reads every event of a log file in order.
pub fn read_events(path: impl AsRef<Path>) -> Result<Vec<Event>> {
    let reader = BufReader::new(File::open(path)?);
    let mut events = Vec::new();
    for (n, line) in reader.lines().enumerate() {
        let line = line?;
        if line.trim().is_empty() {
            continue;
        }
        let event: Event = serde_json::from_str(&line)
            .map_err(|e| StudyError::Validation(format!("event log line {}: {e}", n + 1)))?;
        events.push(event);
    }
    Ok(events)
}
