//! Conditional flow matching for motion sequences.
//!
//! Noise `ε` is transported to data `x` along the straight path
//! `x_t = t·x + (1 − (1 − σ_min)·t)·ε`, whose velocity `x − (1 − σ_min)·ε`
//! is constant in `t`. A transformer regresses that velocity; sampling
//! integrates the learned field with fixed-step Euler and classifier-free
//! guidance.

pub mod dit;
pub mod loss;
pub mod model;
pub mod sample;
pub mod schedule;
pub mod train;

pub use dit::{AttentionKind, Dit, FlowModelConfig};
pub use loss::{cfm_loss, cfm_loss_with};
pub use model::{DitFlow, DitFlowConfig, FlowNet};
pub use sample::{integrate, sample_ode, sample_ode_batch, SampleConfig};
pub use schedule::{cfg_combine, interpolant, target_velocity, Schedule};
pub use train::{train, LrDecay, TrainConfig, TrainReport, TrainSource};

#[derive(Debug, thiserror::Error)]
pub enum FlowError {
    #[error("domain error: {0}")]
    Domain(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error("config error: {0}")]
    Config(String),
    #[error("non-finite {what} at index {index}")]
    NonFinite { what: &'static str, index: usize },
    #[error(transparent)]
    Checkpoint(#[from] dyadic_tensor::checkpoint::CheckpointError),
}

pub type Result<T> = std::result::Result<T, FlowError>;
