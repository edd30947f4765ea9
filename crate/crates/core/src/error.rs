use thiserror::Error;

/// Errors produced by chain construction, solvers, and simulators.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ChainError {
    #[error("negative entry {value} at row {row}, column {col}")]
    NegativeEntry { row: usize, col: usize, value: f64 },
    #[error("row {row} sums to {sum}, outside tolerance of 1")]
    RowSumOutOfTolerance { row: usize, sum: f64 },
    #[error("matrix is not square: {rows} rows, {cols} columns, {labels} labels")]
    NotSquare {
        rows: usize,
        cols: usize,
        labels: usize,
    },
    #[error("duplicate state label {0:?}")]
    DuplicateLabel(String),
    #[error("transition matrix is not irreducible")]
    NotIrreducible,
    #[error("linear system is numerically singular")]
    SingularSystem,
    #[error("length mismatch: expected {expected}, found {found}")]
    LengthMismatch { expected: usize, found: usize },
    #[error("observable is not centered: pi(g) = {0}")]
    NotCentered(f64),
    #[error("chain does not satisfy detailed balance")]
    NotReversible,
    #[error("eigendecomposition failed: {0}")]
    EigenFailure(String),
    #[error("expected a 2-state chain, found {0} states")]
    WrongDimension(usize),
    #[error("invalid parameters: {0}")]
    InvalidParams(String),
    #[error("state space too large: L = {l} exceeds the matrix-form limit {max}")]
    StateSpaceTooLarge { l: usize, max: usize },
    #[error("invalid start state {0}")]
    InvalidStart(usize),
    #[error("trajectory visits state {0} fewer than twice after time 0")]
    InsufficientVisits(usize),
    #[error("computed variance {0} is negative beyond round-off tolerance")]
    NegativeVariance(f64),
}

pub type Result<T> = std::result::Result<T, ChainError>;
