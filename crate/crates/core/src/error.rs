use std::path::PathBuf;

use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("degenerate portfolio: {0}")]
    DegeneratePortfolio(String),

    #[error("degenerate genome: all weights are zero")]
    DegenerateGenome,

    #[error("infeasible cardinality: {count} assets cannot satisfy weight bounds [{min_weight}, {max_weight}]")]
    InfeasibleCardinality {
        count: usize,
        min_weight: f64,
        max_weight: f64,
    },

    #[error("{path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}:{line}: {message}")]
    Parse {
        path: PathBuf,
        line: u64,
        message: String,
    },

    #[error("empty universe: {0}")]
    EmptyUniverse(String),

    #[error("data consistency: {0}")]
    DataConsistency(String),

    #[error("insufficient history for asset {asset}: {detail}")]
    InsufficientHistory { asset: String, detail: String },

    #[error("config: {0}")]
    Config(String),

    #[error("phase 1 infeasible: {0}")]
    Phase1Infeasible(String),

    #[error("phase 2 infeasible: {0}")]
    Phase2Infeasible(String),
}

impl Error {
    pub(crate) fn io(path: impl Into<PathBuf>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }

    /// True for the two "no feasible portfolio" outcomes, as opposed to bad input.
    pub fn is_infeasible(&self) -> bool {
        matches!(self, Error::Phase1Infeasible(_) | Error::Phase2Infeasible(_))
    }
}
