use thiserror::Error;

use crate::model::LpStatus;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, found {found}")]
    DimensionMismatch { expected: usize, found: usize },

    #[error("invalid instance: {0}")]
    InvalidInstance(String),

    #[error("invalid cut: {0}")]
    InvalidCut(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("LP is not optimal (status {0:?})")]
    LpNotOptimal(LpStatus),

    #[error("simplex iteration limit reached after {0} iterations")]
    IterationLimit(usize),

    #[error("basis matrix became singular")]
    SingularBasis,

    #[error("variable {0} is not basic")]
    NotBasic(usize),

    #[error("region is empty")]
    RegionEmpty,

    #[error("region is unbounded, analytic center does not exist")]
    RegionUnbounded,

    #[error("Newton iteration did not converge after {iterations} iterations (decrement {decrement:e})")]
    NoConvergence { iterations: usize, decrement: f64 },

    #[error("LP became infeasible after adding cuts in round {0}")]
    CutMadeInfeasible(usize),

    #[error("enumeration budget exceeded: {0}")]
    BudgetExceeded(String),

    #[error("singular system: {0}")]
    Singular(String),

    #[error("measure error: {0}")]
    Measure(#[from] crate::measures::MeasureError),

    #[error("io error: {0}")]
    Io(String),

    #[error("parse error: {0}")]
    Parse(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<serde_json::Error> for Error {
    fn from(e: serde_json::Error) -> Self {
        Error::Parse(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
