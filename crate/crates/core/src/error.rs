use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("degenerate interval ({lower}, {upper}]: probability mass below 1e-300")]
    DegenerateInterval { lower: f64, upper: f64 },

    #[error("matrix is not positive definite (pivot {pivot} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("objective is not finite at the starting point")]
    InvalidStart,

    #[error("graph contains a directed cycle")]
    CyclicGraph,

    #[error("infeasible request: {0}")]
    Infeasible(String),

    #[error("degenerate level {level} in column `{column}`: cumulative frequency is 0 or 1")]
    DegenerateLevel { column: String, level: usize },

    #[error("pairwise correlation estimation failed for units ({a}, {b})")]
    EstimationFailed { a: usize, b: usize },

    #[error("positive-definiteness repair failed after 20 rescalings (min eigenvalue {min_eig})")]
    RepairFailed { min_eig: f64 },

    #[error("mixture fit failed: {0}")]
    FitFailed(String),

    #[error("undefined metric: {0}")]
    UndefinedMetric(String),

    #[error("invalid input: {0}")]
    Input(String),

    #[error("configuration error: {0}")]
    Config(String),

    #[error("{path}:{line}: {msg}")]
    Parse { path: PathBuf, line: usize, msg: String },

    #[error("stage `{stage}` failed: {source}")]
    Stage {
        stage: &'static str,
        #[source]
        source: Box<Error>,
    },

    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Process exit status: 2 configuration, 3 input or I/O, 4 a failed
    /// pipeline stage, 1 anything else.
    pub fn exit_code(&self) -> i32 {
        match self {
            Error::Config(_) => 2,
            Error::Input(_) | Error::Parse { .. } | Error::Io { .. } => 3,
            Error::Stage { .. } => 4,
            _ => 1,
        }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn in_stage(stage: &'static str) -> impl FnOnce(Error) -> Error {
        move |e| Error::Stage { stage, source: Box::new(e) }
    }
}
