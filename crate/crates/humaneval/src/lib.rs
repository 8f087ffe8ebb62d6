//! Pairwise human preference studies.
//!
//! Raters compare two candidate renderings of the same dyadic sample and
//! answer each protocol question on a five-point scale. This crate builds
//! the item set, assigns items to raters, records ratings and flags in an
//! append-only event log, aggregates preferences per system match-up with
//! 95% confidence intervals and exports per-item deltas for correlation
//! with automatic metrics. [`server`] exposes it all over HTTP.

pub mod aggregate;
pub mod events;
pub mod items;
pub mod protocol;
pub mod server;
pub mod service;
pub mod study;

pub use aggregate::{
    aggregate, aggregate_with, export_deltas, Aggregate, CiMethod, DeltaExport, DeltaRow, DimensionSummary, Exclusion, ItemMean,
    MatchupSummary, MetricScores,
};
pub use events::{read_events, Event, EventLog, FlagRecord, RatingRecord, SCHEMA_VERSION};
pub use items::{build_items, SampleMedia, Speaker, StudyItem, VadSegment};
pub use protocol::{Dimension, FlagCategory, Protocol, ProtocolSheet, Section};
pub use service::StudyService;
pub use study::{AuditEntry, Study, StudyConfig};

#[derive(Debug, thiserror::Error)]
pub enum StudyError {
    #[error("config error: {0}")]
    Config(String),
    #[error("validation error: {0}")]
    Validation(String),
    #[error("auth error: {0}")]
    Auth(String),
    #[error("not found: {0}")]
    NotFound(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, StudyError>;
