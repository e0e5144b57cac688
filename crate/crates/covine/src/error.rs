use thiserror::Error;

/// Coarse classification used by callers that must map failures to process
/// exit codes: validation problems are recoverable user errors, numerical
/// problems are not.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorKind {
    Validation,
    Numerical,
}

#[derive(Debug, Error)]
pub enum CovineError {
    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("quantile knots coincide at index {index}; the data has too many ties for {m} knots")]
    CoincidentQuantileKnots { index: usize, m: usize },

    #[error("covariate '{name}' has too many ties for quantile knot placement")]
    CovariateTies { name: String },

    #[error("invalid vine structure: {0}")]
    InvalidStructure(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

impl CovineError {
    pub fn kind(&self) -> ErrorKind {
        match self {
            CovineError::InvalidInput(_)
            | CovineError::CoincidentQuantileKnots { .. }
            | CovineError::CovariateTies { .. }
            | CovineError::InvalidStructure(_) => ErrorKind::Validation,
            CovineError::Numerical(_) => ErrorKind::Numerical,
        }
    }

    pub fn invalid(msg: impl Into<String>) -> Self {
        CovineError::InvalidInput(msg.into())
    }

    pub fn numerical(msg: impl Into<String>) -> Self {
        CovineError::Numerical(msg.into())
    }
}

pub type Result<T> = std::result::Result<T, CovineError>;
