//! Condition assembly and the conditioned motion model.
//!
//! A [`ConditionBundle`] holds named, frame-aligned blocks: the agent's
//! speech (A1), the user's speech (A2), the user's visual stream (V2), and
//! any control blocks. [`MotionModel`] embeds each block, swaps dropped
//! blocks for their learned null embeddings, concatenates, projects to the
//! transformer width and adds the result to the motion tokens.

pub mod bundle;
pub mod cascade;
pub mod data;
pub mod model;

pub use bundle::{
    build_condition, condition_dropout, joint_concat, joint_split, Block, BlockValue, ConditionBundle, Mode, A1, A2,
    V2,
};
pub use cascade::{run_cascade, run_stage2, CascadeOrder, CascadeSpec, FaceCond};
pub use data::{DatasetConfig, Example, GestureSource, Normalizers, Target, WindowDataset, AROUSAL, BODY_COND, FACE_COND, GESTURE, VALENCE};
pub use model::{BlockKind, BlockSpec, DropPolicy, EncoderConfig, GuidanceDrop, MotionModel, MotionModelConfig};

#[derive(Debug, thiserror::Error)]
pub enum ConditionError {
    #[error("config error: {0}")]
    Config(String),
    #[error("shape error: {0}")]
    Shape(String),
    #[error(transparent)]
    Feature(#[from] dyadic_features::FeatureError),
    #[error(transparent)]
    Flow(#[from] dyadic_flowmatch::FlowError),
    #[error(transparent)]
    Control(#[from] dyadic_control::ControlError),
}

pub type Result<T> = std::result::Result<T, ConditionError>;

impl From<ConditionError> for dyadic_flowmatch::FlowError {
    fn from(e: ConditionError) -> Self {
        match e {
            ConditionError::Flow(f) => f,
            ConditionError::Shape(s) => Self::Shape(s),
            other => Self::Config(other.to_string()),
        }
    }
}
