use alloc::boxed::Box;
use alloc::string::String;
use alloc::vec::Vec;

use chrono::NaiveDate;

pub type Result<T, E = Error> = core::result::Result<T, E>;

#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    #[error("invalid parameter `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("invalid panel: {0}")]
    InvalidPanel(String),

    #[error("insufficient data: need {needed}, got {got} ({what})")]
    InsufficientData {
        what: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("fewer than two instruments remain after alignment ({remaining})")]
    TooFewInstruments { remaining: usize },

    #[error("panel still has {count} absent cells; align it first")]
    AbsentCells { count: usize },

    #[error("zero variance in epoch for instruments {instruments:?}")]
    ZeroVariance { instruments: Vec<String> },

    #[error("matrix is not symmetric (max asymmetry {asymmetry:e})")]
    NotSymmetric { asymmetry: f64 },

    #[error(
        "eigensolver did not converge for eigenvalue {index} after {iterations} iterations \
         (residual off-diagonal {residual:e})"
    )]
    NoConvergence {
        index: usize,
        iterations: usize,
        residual: f64,
    },

    #[error("design matrix is rank deficient: column {column} is collinear with columns {with:?}")]
    RankDeficient { column: usize, with: Vec<usize> },

    #[error("date axes do not match: {0}")]
    DateMismatch(String),

    #[error("index series is missing {} panel dates (first {first})", missing.len())]
    IndexGaps {
        first: NaiveDate,
        missing: Vec<NaiveDate>,
    },

    #[error("sample has zero variance")]
    DegenerateSample,

    #[error(
        "could not bracket the critical bandwidth in [{lo:e}, {hi:e}] ({modes} modes at upper end)"
    )]
    BracketFailure { lo: f64, hi: f64, modes: usize },

    #[error("epoch ending {end_date}: {source}")]
    Epoch {
        end_date: NaiveDate,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        Error::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }

    pub(crate) fn at_epoch(self, end_date: NaiveDate) -> Self {
        match self {
            e @ Error::Epoch { .. } => e,
            e => Error::Epoch {
                end_date,
                source: Box::new(e),
            },
        }
    }

    /// True for failures of a numerical routine, as opposed to bad input.
    pub fn is_numerical(&self) -> bool {
        match self {
            Error::NoConvergence { .. }
            | Error::RankDeficient { .. }
            | Error::BracketFailure { .. }
            | Error::ZeroVariance { .. }
            | Error::DegenerateSample => true,
            Error::Epoch { source, .. } => source.is_numerical(),
            _ => false,
        }
    }
}
