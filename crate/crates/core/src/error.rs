use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("non-finite value in {context} at row {row}, column {col}")]
    NonFiniteInput {
        context: String,
        row: usize,
        col: usize,
    },

    #[error("empty view: {0}")]
    EmptyView(String),

    #[error("scale parameter must be positive, got {0}")]
    NonPositiveScale(f64),

    #[error("squared residual must be non-negative, got {0}")]
    NegativeResidual(f64),

    #[error("linear system is singular ({0})")]
    SingularSystem(String),

    #[error("objective increased from {before} to {after} during {step}")]
    DivergenceDetected {
        step: String,
        before: f64,
        after: f64,
    },

    #[error("gram matrix of view {view} is not positive semi-definite (min eigenvalue {min_eigenvalue})")]
    GramNotPsd { view: usize, min_eigenvalue: f64 },

    #[error("index out of range: {0}")]
    IndexOutOfRange(String),

    #[error("stability bound requires C2 > 0")]
    ZeroRegularizer,

    #[error("windowed signal has zero variance")]
    DegenerateSignal,

    #[error("estimate is rank deficient")]
    RankDeficient,

    #[error("training set is empty")]
    EmptyTrainingSet,

    #[error("dimension mismatch in view {view}: expected {expected} columns, found {found}")]
    DimensionMismatch {
        view: usize,
        expected: usize,
        found: usize,
    },

    #[error("missing input: {0}")]
    MissingInput(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(path: impl Into<PathBuf>, line: usize, message: impl Into<String>) -> Self {
        Error::Parse {
            path: path.into(),
            line,
            message: message.into(),
        }
    }
}
