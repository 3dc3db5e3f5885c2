use std::path::PathBuf;

use thiserror::Error;

/// Errors raised by the diagnostic library.
#[derive(Debug, Error)]
pub enum Error {
    #[error("io error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error("schema error: {0}")]
    Schema(String),

    #[error("unknown column `{0}`")]
    UnknownColumn(String),

    #[error("row {row}, column `{column}`: {message}")]
    TypeViolation {
        row: usize,
        column: String,
        message: String,
    },

    #[error("row {row}: expected {expected} fields, found {found}")]
    RaggedRow {
        row: usize,
        expected: usize,
        found: usize,
    },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    #[error("variable `{0}` still has missing cells")]
    Incomplete(String),

    #[error("balance problem for `{variable}`: {message}")]
    Balance { variable: String, message: String },

    #[error("balance constraint `{constraint}` is structurally infeasible: {message}")]
    StructurallyInfeasible { constraint: String, message: String },

    #[error("weighted variance is degenerate (effective sample has a single support point)")]
    DegenerateVariance,

    #[error("both samples are degenerate with unequal means ({0} vs {1})")]
    InfiniteSmd(f64, f64),

    #[error("log variance ratio needs positive variance on both sides")]
    ZeroVariance,

    #[error("linear fit needs more than {needed} rows, found {found}")]
    TooFewRows { needed: usize, found: usize },

    #[error("rank deficient design: {0}")]
    RankDeficient(String),

    #[error("`{variable}` has {available} observed values, at least {needed} required")]
    InsufficientDonors {
        variable: String,
        available: usize,
        needed: usize,
    },

    #[error("covariate covariance is degenerate after regularization")]
    DegenerateCovariance,

    #[error("no imputation method assigned to incomplete variable `{0}`")]
    UnassignedVariable(String),

    #[error("method `{method}` cannot impute {kind} variable `{variable}`")]
    MethodKindMismatch {
        method: String,
        kind: String,
        variable: String,
    },

    #[error("unknown imputation method `{0}`")]
    UnknownMethod(String),

    #[error("cannot pool an empty group")]
    EmptyGroup,

    #[error("{failed} of {total} replications failed, aborting: {first}")]
    TooManyFailures {
        failed: usize,
        total: usize,
        first: String,
    },
}

pub type Result<T> = std::result::Result<T, Error>;
