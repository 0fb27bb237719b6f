use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("parse error (line {line}): {msg}")]
    Parse { line: usize, msg: String },

    #[error("topology error: {0}")]
    Topology(String),

    #[error("degenerate triangle {triangle}: area {area:e} below {threshold:e}")]
    DegenerateTriangle {
        triangle: usize,
        area: f64,
        threshold: f64,
    },

    #[error("sampling error: {0}")]
    Sampling(String),

    #[error("vertex {vertex} has no positive local-function weight (coverage not ensured)")]
    Coverage { vertex: usize },

    #[error("radius adaptation did not terminate after {rounds} rounds; offending samples {offending:?}")]
    NonTermination { rounds: usize, offending: Vec<usize> },

    #[error("reduced mass matrix is ill-conditioned (min/max eigenvalue ratio {ratio:e})")]
    IllConditioned { ratio: f64 },

    #[error("eigensolver did not converge after {iterations} iterations (worst residual {residual:e})")]
    Convergence { iterations: usize, residual: f64 },

    #[error("matrix is not positive definite (pivot {pivot:e} at row {row})")]
    NotPositiveDefinite { row: usize, pivot: f64 },

    #[error("least-squares system is rank deficient (min/max eigenvalue ratio {ratio:e})")]
    RankDeficient { ratio: f64 },

    #[error("invalid schedule: {0}")]
    Schedule(String),

    #[error("dimension mismatch: {0}")]
    Dimension(String),

    #[error("ground truth missing for vertex {vertex}")]
    MissingGt { vertex: usize },

    #[error("bound hypothesis violated: {0}")]
    Hypothesis(String),

    #[error("initial map error: {0}")]
    InitMap(String),

    #[error("index {index} out of range (limit {limit}) in {what}")]
    IndexRange {
        what: String,
        index: usize,
        limit: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("bad cache file {path}: {msg}")]
    Cache { path: PathBuf, msg: String },
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    pub(crate) fn parse(line: usize, msg: impl Into<String>) -> Self {
        Error::Parse {
            line,
            msg: msg.into(),
        }
    }
}
