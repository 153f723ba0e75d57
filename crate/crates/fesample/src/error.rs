//! Crate-wide error type.
//!
//! Numeric non-convergence is deliberately *not* an error: solvers report a
//! `converged` flag and the best value found. Errors are reserved for invalid
//! inputs, guard violations and I/O failures.

use thiserror::Error;

/// Errors produced by model construction, oracles and solvers.
#[derive(Debug, Error)]
pub enum Error {
    /// Matrix/vector dimensions do not match the declared vertex count.
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    /// A model failed structural validation (asymmetry, nonzero diagonal,
    /// malformed interaction terms, ...).
    #[error("invalid model: {0}")]
    InvalidModel(String),

    /// An exact computation was requested above the enumeration guard.
    #[error("enumeration over 2^{n} states exceeds the guard 2^{guard}")]
    EnumerationTooLarge { n: usize, guard: usize },

    /// A vertex subset was empty, out of range or contained duplicates.
    #[error("invalid vertex subset: {0}")]
    InvalidSubset(String),

    /// A product-measure marginal left `[-1, 1]`.
    #[error("marginal out of range: x[{index}] = {value}")]
    MarginalOutOfRange { index: usize, value: f64 },

    /// A scalar parameter left its documented range.
    #[error("parameter out of range: {0}")]
    ParameterOutOfRange(String),

    /// The grid search would enumerate more cells than the configured budget.
    #[error("grid of {cells} cells exceeds the budget {budget}")]
    GridTooLarge { cells: u128, budget: u128 },

    /// Fewer than the required number of estimator repeats succeeded.
    #[error("only {got} of {need} required repeats succeeded")]
    NotEnoughRepeats { got: usize, need: usize },

    /// A user-supplied free-energy oracle failed.
    #[error("oracle failure: {0}")]
    OracleFailure(String),

    /// A file could not be parsed as a model, decomposition or program.
    #[error("parse error: {0}")]
    Parse(String),

    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),

    #[error("json error: {0}")]
    Json(#[from] serde_json::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
