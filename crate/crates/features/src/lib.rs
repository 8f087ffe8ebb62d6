//! Feature contracts between upstream extractors and the motion models.
//!
//! Face frames are 137 channels (128 expression, 3 head rotation, 6 head and
//! body translation), body frames are 258 channels (43 SMPL-H joints in the
//! continuous 6D rotation encoding, legs removed), and the joint stream is
//! their 395-channel concatenation. Everything here is a pure function.

pub mod kinematics;
pub mod layout;
pub mod norm;
pub mod pca;
pub mod resample;
pub mod rotation;
pub mod savgol;

pub use layout::{BodyFeatures, FaceFeatures, SpeechTokenStream};
pub use norm::NormStats;
pub use pca::Pca;

pub const FPS: f64 = 30.0;
pub const SPEECH_RATE: f64 = 12.5;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum FeatureError {
    #[error("6D rotation columns are parallel or zero; cannot orthonormalise")]
    Degenerate6d,
    #[error("shape mismatch: expected {expected}, got {got}")]
    Shape { expected: String, got: String },
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("non-finite value in {0}")]
    NonFinite(&'static str),
    #[error("token {token} outside vocabulary of size {vocab}")]
    Token { token: u32, vocab: u32 },
}

pub type Result<T> = std::result::Result<T, FeatureError>;
