use thiserror::Error;

/// Errors raised by the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum PieError {
    #[error("dimension mismatch in {op}: expected {expected}, found {found}")]
    DimensionMismatch {
        op: &'static str,
        expected: String,
        found: String,
    },

    #[error("no value assigned to variable {0}")]
    MissingVariable(&'static str),

    #[error("integration bound refers to the integration variable {0}")]
    InvalidBound(&'static str),

    #[error("augmented boundary matrix is singular; choose an F3 that makes it invertible")]
    SingularAugmentedG,

    #[error("no pivot permutation brings the boundary matrix to [I, M] form")]
    NoPivotPermutation,

    #[error("degree of the operator inequality ({needed}) exceeds the cone capacity ({capacity}); increase the degree d")]
    DegreeCapacity { needed: usize, capacity: usize },

    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },

    #[error("invalid argument: {0}")]
    Usage(String),

    #[error("numerical failure: {0}")]
    Numerical(String),
}

pub type Result<T> = std::result::Result<T, PieError>;

pub(crate) fn dim_err(op: &'static str, expected: impl ToString, found: impl ToString) -> PieError {
    PieError::DimensionMismatch {
        op,
        expected: expected.to_string(),
        found: found.to_string(),
    }
}
