use std::path::PathBuf;

use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: usize,
        message: String,
    },

    #[error("integrity error: {0}")]
    Integrity(String),

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("no retweeting users")]
    NoRetweetingUsers,

    #[error("degenerate network: {0}")]
    DegenerateNetwork(String),

    #[error("empty network")]
    EmptyNetwork,

    #[error("unknown users: {}", .0.join(", "))]
    UnknownUsers(Vec<String>),

    #[error("duplicate community name {0:?}")]
    DuplicateName(String),

    #[error("training set must contain both classes")]
    SingleClass,

    #[error("model error: {0}")]
    Model(String),

    #[error("unknown community {0}")]
    UnknownCommunity(String),

    #[error("unknown frame label {0:?}")]
    UnknownFrame(String),

    #[error("trend undefined at k = {0}")]
    UndefinedAt(f64),

    #[error("constant series")]
    ConstantSeries,

    #[error("series length mismatch or too short: {0}")]
    BadSeries(String),

    #[error("no correlation pairs with enough common points")]
    NoComparablePairs,

    #[error("no signals available for community {0}")]
    NoSignals(String),

    #[error("infeasible scenario: {0}")]
    InfeasibleScenario(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
