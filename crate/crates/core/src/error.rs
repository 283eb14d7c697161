use thiserror::Error;

use crate::cavi::VariationalState;

/// Errors produced by the fitting, simulation and diagnostics routines.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch in {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("invalid data: {0}")]
    InvalidData(String),

    #[error("column {0} of the design matrix is identically zero")]
    ZeroColumn(usize),

    #[error("exhaustive enumeration needs {subsets} subsets (budget {budget}); enable sampling to get a bound")]
    EnumerationBudget { subsets: u128, budget: u128 },

    #[error("non-finite surrogate objective at iteration {iteration}")]
    NonFinite {
        iteration: usize,
        state: Box<VariationalState>,
    },

    #[error("parse error at row {row}: {message}")]
    Parse { row: usize, message: String },

    #[error(transparent)]
    Json(#[from] serde_json::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_len(what: &'static str, expected: usize, got: usize) -> Result<()> {
    if expected == got {
        Ok(())
    } else {
        Err(Error::DimensionMismatch { what, expected, got })
    }
}
