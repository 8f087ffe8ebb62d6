//! Dyadic interaction corpus: record types, manifest ingestion and
//! validation, corpus statistics, QA filtering, text analyses, the binary
//! feature-file format, and a seeded synthetic corpus generator.

pub mod featio;
pub mod manifest;
pub mod qa;
pub mod records;
pub mod splits;
pub mod stats;
pub mod synth;
pub mod text;

pub use manifest::{load_manifest, parse_manifest, write_manifest, CorpusManifest};
pub use records::{
    AnnotationKind, AnnotationRecord, InteractionRecord, InteractionType, IpcOctant, Part,
    Participant, Relationship, Split,
};

#[derive(Debug, thiserror::Error)]
pub enum CorpusError {
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },
    #[error("integrity error{}: {message}", line.map(|l| format!(" at line {l}")).unwrap_or_default())]
    Integrity { line: Option<usize>, message: String },
    #[error("schema error: {0}")]
    Schema(String),
    #[error("domain error: {0}")]
    Domain(String),
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Feature(#[from] dyadic_features::FeatureError),
}

impl CorpusError {
    pub(crate) fn io(path: &std::path::Path, source: std::io::Error) -> Self {
        Self::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

pub type Result<T> = std::result::Result<T, CorpusError>;
