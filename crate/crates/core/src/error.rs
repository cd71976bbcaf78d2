//! Error type shared by every module in the crate.

use thiserror::Error;

/// Crate-wide error enum.
///
/// Variants are grouped by the stage that raises them; [`Error::category`]
/// maps them onto the stable process exit codes used by the CLI.
#[derive(Debug, Error)]
pub enum Error {
    // -- matrix / vector preconditions -------------------------------------
    #[error("matrix dimensions must be positive, got {rows}x{cols}")]
    EmptyMatrix { rows: usize, cols: usize },
    #[error("matrix data length {len} does not match {rows}x{cols}")]
    DataLength { rows: usize, cols: usize, len: usize },
    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("non-finite entry at row {row}, column {col}")]
    NonFiniteEntry { row: usize, col: usize },
    #[error("vectors have mismatched lengths {left} and {right}")]
    LengthMismatch { left: usize, right: usize },
    #[error("vector too short: need at least {min} elements, got {len}")]
    VectorTooShort { min: usize, len: usize },
    #[error("correlation undefined: input vector has zero variance")]
    ConstantVector,
    #[error("cosine distance undefined: input vector has zero norm")]
    ZeroVector,

    // -- CSV / file formats -------------------------------------------------
    #[error("{path}, line {line}: {reason}")]
    CsvFormat { path: String, line: usize, reason: String },
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("{path}: {reason}")]
    FileFormat { path: String, reason: String },

    // -- factorization ------------------------------------------------------
    #[error("rank {k} exceeds the smaller matrix dimension {max}")]
    RankTooLarge { k: usize, max: usize },
    #[error("input matrix is all-zero; nothing to factorize")]
    DegenerateInput,
    #[error("relative error undefined: data matrix has zero norm")]
    ZeroData,

    // -- scan / clustering ----------------------------------------------------
    #[error("AIC undefined for non-positive relative error {value}")]
    NonPositiveError { value: f64 },
    #[error("ensemble member {member} contributed an all-zero column")]
    DegenerateColumns { member: usize },
    #[error("invalid scan configuration: {reason}")]
    InvalidConfig { reason: String },
    #[error("scan failed at k = {k}: {source}")]
    ScanAtK {
        k: usize,
        #[source]
        source: Box<Error>,
    },

    // -- synthetic data -------------------------------------------------------
    #[error("column {column} failed its correlation constraint {budget} times; spec is likely infeasible")]
    RejectionBudgetExceeded { column: usize, budget: usize },
    #[error("corpus generation failed at index {index}: {source}")]
    CorpusAtIndex {
        index: usize,
        #[source]
        source: Box<Error>,
    },

    // -- windows / classifier ---------------------------------------------------
    #[error("need at least 7 consecutive K records, got {len}")]
    TooFewRecords { len: usize },
    #[error("scan records are not consecutive in k at position {position}")]
    NonConsecutiveRecords { position: usize },
    #[error("feature vector has length {got}, expected {expected}")]
    ShapeMismatch { expected: usize, got: usize },
    #[error("training diverged: loss became non-finite at epoch {epoch}")]
    Divergence { epoch: usize },
    #[error("training set is empty")]
    EmptyTrainingSet,
    #[error(
        "model was trained with feature normalization '{model}', pipeline expects '{expected}'"
    )]
    NormalizationMismatch { model: String, expected: String },
}

/// Coarse error category, used for process exit codes.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ErrorCategory {
    /// Bad flags, invalid configuration: exit code 1.
    Usage,
    /// Unreadable or malformed data files: exit code 2.
    Data,
    /// Numerical failure (degenerate input, divergence): exit code 3.
    Numerical,
}

impl Error {
    pub fn category(&self) -> ErrorCategory {
        use Error::*;
        match self {
            InvalidConfig { .. } | RankTooLarge { .. } | TooFewRecords { .. } => {
                ErrorCategory::Usage
            }
            CsvFormat { .. }
            | Io { .. }
            | FileFormat { .. }
            | NegativeEntry { .. }
            | NonFiniteEntry { .. }
            | EmptyMatrix { .. }
            | DataLength { .. }
            | NormalizationMismatch { .. }
            | EmptyTrainingSet
            | NonConsecutiveRecords { .. } => ErrorCategory::Data,
            ScanAtK { source, .. } => source.category(),
            CorpusAtIndex { source, .. } => source.category(),
            _ => ErrorCategory::Numerical,
        }
    }
}

pub type Result<T> = std::result::Result<T, Error>;
