//! Automatic evaluation of generated motion.

pub mod correlate;
pub mod diversity;
pub mod following;
pub mod frechet;
pub mod jerk;
pub mod report;

pub use correlate::{correlate, kendall_tau_b, pearson, spearman, Correlation};
pub use diversity::{diversity, DEFAULT_PAIRS};
pub use following::{condition_following, Space};
pub use frechet::{frechet_distance, frechet_from_fits, GaussianFit, DEFAULT_EPS};
pub use jerk::{boundary_smoothness, jerk, mean_jerk, KeypointTrack, DEFAULT_SIGMA, DEFAULT_WINDOW};
pub use report::{MeanStd, MetricPlugin, MetricTable, TableRow, UnavailableMetric};

#[derive(Debug, thiserror::Error)]
pub enum MetricError {
    #[error("shape error: {0}")]
    Shape(String),
    #[error("invalid parameter: {0}")]
    Param(String),
    #[error("numeric error: {0}")]
    Numeric(String),
    #[error("boundary at frame {boundary} needs {margin} frames on each side of a {frames}-frame track")]
    Margin {
        boundary: usize,
        margin: usize,
        frames: usize,
    },
    #[error("correlation undefined: {0}")]
    Undefined(String),
    #[error(transparent)]
    Feature(#[from] dyadic_features::FeatureError),
}

pub type Result<T> = std::result::Result<T, MetricError>;
