//! LLM-guided code prediction.
//!
//! A small MLP reads the hidden states of a frozen speech language model,
//! resampled to a chosen token rate, and predicts one emotion or gesture
//! code per window. The predicted codes become categorical condition blocks
//! for the motion models. [`FrozenSpeechLm`] is a fixed random recurrent
//! network that stands in for the language model, so everything runs
//! without external weights.

pub mod fixture;
pub mod hidden;
pub mod lm;
pub mod metrics;
pub mod mlp;
pub mod train;

pub use fixture::{gesture_fixture, window_labels, FixtureConfig, FixtureSequence};
pub use hidden::{interpolate_hidden, HiddenStates};
pub use lm::{FrozenSpeechLm, LM_RATE};
pub use metrics::{accuracy, group_3class, macro_prf, Prf};
pub use mlp::{Adapter, AdapterConfig};
pub use train::{
    evaluate, pairs_from_fixture, rate_sweep, train_adapter, AdapterTrainConfig, CodePrediction, CodeStream, EpochMetrics, RateRow,
    Scores, TrainPair, TrainedAdapter,
};

#[derive(Debug, thiserror::Error)]
pub enum AdapterError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("data error: {0}")]
    Data(String),
}

pub type Result<T> = std::result::Result<T, AdapterError>;
