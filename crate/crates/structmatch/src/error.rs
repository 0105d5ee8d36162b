//! One error type for the whole crate, plus the exit-code mapping the CLI
//! applies to it.

use std::path::PathBuf;

use thiserror::Error;

use crate::graph::RelationFamily;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    /// Malformed on-disk data (bad NPY header, wrong dtype, bad JSON field).
    #[error("{path}: {reason}")]
    Format { path: PathBuf, reason: String },

    #[error("{path}: {source}")]
    Json {
        path: PathBuf,
        #[source]
        source: serde_json::Error,
    },

    #[error("{path}: {source}")]
    Toml {
        path: PathBuf,
        #[source]
        source: Box<toml::de::Error>,
    },

    #[error("invalid shape: {0}")]
    Shape(String),

    #[error("unnormalized probability vector at element {index}: sum = {sum}")]
    UnnormalizedProbability { index: usize, sum: f64 },

    #[error("probability out of [0, 1] at element {index}, channel {channel}: {value}")]
    ProbabilityOutOfRange {
        index: usize,
        channel: usize,
        value: f32,
    },

    #[error("label {label} out of range: class space declares {num_classes} classes")]
    ClassOutOfRange { label: u32, num_classes: usize },

    #[error("dimension mismatch: {0}")]
    DimMismatch(String),

    #[error("degenerate grid: every extent is 1, so the scene diagonal is zero")]
    DegenerateGrid,

    #[error("no regions to build a graph from")]
    EmptyRegionSet,

    #[error("attribute length mismatch: {left} vs {right}")]
    AttrLength { left: usize, right: usize },

    #[error("relation family mismatch: {left} vs {right}")]
    FamilyMismatch {
        left: RelationFamily,
        right: RelationFamily,
    },

    #[error("annotation {annotation} has no cells of class {class}")]
    MissingClass { annotation: usize, class: u32 },

    #[error("no training annotations given")]
    NoAnnotations,

    /// A model class no scene region votes for. The CLI maps this to exit
    /// code 2 so callers can tell "the classifier missed a class" apart from
    /// plain input errors.
    #[error("class {class} has no candidate regions")]
    EmptyCandidateClass { class: u32 },

    /// The exhaustive search would enumerate more tuples than allowed.
    /// Exit code 3.
    #[error("candidate product {product} exceeds the enumeration budget {budget}")]
    CandidateExplosion { product: u128, budget: u64 },

    #[error("no one-to-one assignment exists within the candidate sets")]
    InfeasibleMatching,

    #[error("assignment stage mismatch: expected {expected}")]
    StageMismatch { expected: &'static str },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("synthetic scene generation failed: {0}")]
    Synth(String),
}

impl Error {
    pub fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn format(path: impl Into<PathBuf>, reason: impl Into<String>) -> Self {
        Error::Format {
            path: path.into(),
            reason: reason.into(),
        }
    }

    /// Process exit code the CLI reports for this error.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::EmptyCandidateClass { .. } => 2,
            Error::CandidateExplosion { .. } => 3,
            _ => 1,
        }
    }
}
