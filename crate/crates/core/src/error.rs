use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    #[error("array length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },

    #[error("query C = {query} outside grid range [{min}, {max}]")]
    OutOfRange { query: f64, min: f64, max: f64 },

    #[error("trajectories cross between nodes {node} and {next}", next = .node + 1)]
    TrajectoryCrossing { node: usize },

    #[error("U0 = {value} is not positive at node {node}")]
    NotForwardInTime { node: usize, value: f64 },

    #[error("trajectory at node {node} is not timelike (|U1|/U0 = {beta})")]
    Superluminal { node: usize, beta: f64 },

    #[error("spatial metric gamma = {value} is not positive at node {node}")]
    NonPositiveGamma { node: usize, value: f64 },

    #[error("non-finite {what} at node {node}")]
    NonFinite { what: &'static str, node: usize },

    #[error("dt/dtau factor {value} is not positive at node {node}")]
    NonPositiveTau { node: usize, value: f64 },

    #[error("at T = {tau}: {source}")]
    AtTime {
        tau: f64,
        #[source]
        source: Box<Error>,
    },

    #[error("outside the domain of the {ensemble} ensemble: {reason}")]
    Domain { ensemble: &'static str, reason: String },

    #[error("weight function must be {expected}")]
    WrongWeightKind { expected: &'static str },

    #[error("invalid configuration value for `{key}`: {reason}")]
    InvalidConfig { key: String, reason: String },

    #[error("line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("need at least {needed} snapshots, found {found}")]
    InsufficientSnapshots { needed: usize, found: usize },

    #[error("snapshot cadence is not uniform: {0}")]
    NonUniformCadence(String),

    #[error("series and grid disagree: {0}")]
    SeriesMismatch(String),

    #[error("{}: {source}", path.display())]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    pub(crate) fn config(key: &str, reason: impl Into<String>) -> Self {
        Error::InvalidConfig { key: key.to_string(), reason: reason.into() }
    }

    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io { path: path.into(), source }
    }

    pub(crate) fn at_time(self, tau: f64) -> Self {
        match self {
            e @ Error::AtTime { .. } => e,
            e => Error::AtTime { tau, source: Box::new(e) },
        }
    }
}
