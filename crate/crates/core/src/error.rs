use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("frame mismatch: expected `{expected}`, found `{found}`")]
    FrameMismatch { expected: String, found: String },

    #[error("frame identifiers must be nonempty")]
    EmptyFrameId,

    #[error("non-finite value in {0}")]
    NonFinite(String),

    #[error("not a proper rotation: {0}")]
    NotARotation(String),

    #[error("invalid {what}: {reason}")]
    Invalid { what: &'static str, reason: String },

    #[error("length mismatch: {left} vs {right}")]
    LengthMismatch { left: usize, right: usize },

    #[error("empty input: {0}")]
    EmptyInput(&'static str),

    #[error("inconsistent frames: {0}")]
    InconsistentFrames(String),

    #[error("degenerate geometry: {0}")]
    DegenerateGeometry(String),

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error("no correspondences survived distance gating")]
    NoCorrespondences,

    #[error("insufficient points: need at least {needed}, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("no consensus: best model has {best} inliers, need {required}")]
    NoConsensus { best: usize, required: usize },

    #[error("lines are parallel, corner undefined")]
    ParallelLines,

    #[error("board rejected: {edge} edge length error {error:.4} m exceeds {threshold} m")]
    BoardRejected {
        edge: String,
        error: f64,
        threshold: f64,
    },

    #[error("too sparse: {edge} edge received {count} points")]
    TooSparse { edge: String, count: usize },

    #[error("point is behind the camera (depth {depth:.3e} m)")]
    BehindCamera { depth: f64 },

    #[error("no convergence after {iterations} iterations")]
    NoConvergence { iterations: usize },

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{location}: malformed input: {message}")]
    Malformed { location: String, message: String },

    #[error("{location}: unsupported encoding `{encoding}`, only ascii is supported")]
    UnsupportedEncoding { location: String, encoding: String },

    #[error("{location}: missing field `{field}`")]
    MissingField { location: String, field: String },

    #[error("{location}: row {row}: expected {expected} fields, found {found}")]
    WrongArity {
        location: String,
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("{location}: row {row}, column `{column}`: non-finite value")]
    NonFiniteValue {
        location: String,
        row: usize,
        column: String,
    },

    #[error("{location}: {source}")]
    Json {
        location: String,
        #[source]
        source: serde_json::Error,
    },
}

impl Error {
    /// True for failures of the numerics (degenerate inputs, no consensus,
    /// divergence) as opposed to malformed input.
    pub fn is_numerical(&self) -> bool {
        matches!(
            self,
            Error::DegenerateGeometry(_)
                | Error::DegenerateConfiguration(_)
                | Error::NoCorrespondences
                | Error::NoConsensus { .. }
                | Error::ParallelLines
                | Error::BoardRejected { .. }
                | Error::TooSparse { .. }
                | Error::BehindCamera { .. }
                | Error::NoConvergence { .. }
                | Error::InsufficientPoints { .. }
        )
    }

    pub(crate) fn frame_mismatch(expected: &impl ToString, found: &impl ToString) -> Self {
        Error::FrameMismatch {
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn invalid(what: &'static str, reason: impl Into<String>) -> Self {
        Error::Invalid {
            what,
            reason: reason.into(),
        }
    }
}
