//! Control conditions layered on top of speech conditioning.
//!
//! Arousal-valence tracks become per-second tokens, expressivity becomes
//! bucketed motion dynamism, and gesture conditions are either raw body
//! frames or VQ codes with per-frame temporal dropping.

pub mod av;
pub mod buckets;
pub mod dynamism;
pub mod gesture;
pub mod signals;
pub mod vq;

pub use av::{av_tokens, AvRange, AvSequence};
pub use buckets::{bucketize, fit_thresholds, BucketSpec, Scheme};
pub use dynamism::{dynamism, moving_average, moving_average_rows, DEFAULT_MA_WINDOW};
pub use gesture::{temporal_gesture_drop, GestureCondition};
pub use signals::{head_rotation, ControlKind, FauMapping, FAU_DIM};
pub use vq::{GestureCodebook, VqConfig, VqReport};

#[derive(Debug, thiserror::Error)]
pub enum ControlError {
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("value {value} outside [{lo}, {hi}] in {what}")]
    Range {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("degenerate distribution: {0}")]
    Degenerate(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("code {0} is the null condition and has no decoding")]
    NullDecode(usize),
}

pub type Result<T> = std::result::Result<T, ControlError>;
