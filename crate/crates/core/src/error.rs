use thiserror::Error;

/// Errors raised by distribution construction, spectral analysis and the
/// bound checkers.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("alphabet is empty")]
    EmptyAlphabet,

    #[error("duplicate label {0:?} in alphabet")]
    DuplicateLabel(String),

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("negative entry {value} at ({row}, {col})")]
    NegativeEntry { row: usize, col: usize, value: f64 },

    #[error("total mass {sum} differs from 1 by more than the validation tolerance")]
    SumNotOne { sum: f64 },

    #[error("kernel row {row} sums to {sum}, not 1")]
    NotStochastic { row: usize, sum: f64 },

    #[error("zero marginal mass on {side} symbol {index}")]
    ZeroMarginal { side: &'static str, index: usize },

    #[error("product alphabet of {cells} cells exceeds the cap of {cap}")]
    SizeOverflow { cells: u128, cap: usize },

    #[error("unknown axis {0:?}")]
    UnknownAxis(String),

    #[error("conditioning event has probability {prob}")]
    ZeroEvent { prob: f64 },

    #[error("singular value decomposition did not converge within {sweeps} sweeps")]
    ConvergenceFailure { sweeps: usize },

    #[error("matrix is not a valid tilde matrix: {0}")]
    InvalidTilde(String),

    #[error("alphabet mismatch: {0}")]
    AlphabetMismatch(String),

    #[error("{count} subset pairs exceed the cap of {cap}")]
    SubsetExplosion { count: u128, cap: usize },

    #[error("requested {requested} exceeds the cap of {cap}")]
    CapExceeded { requested: u128, cap: u128 },

    #[error("source is degenerate: largest letter probability {pmax}")]
    DegenerateSource { pmax: f64 },

    #[error("scaling matrix is singular")]
    SingularScaling,

    #[error("degenerate binary marginal parameter {0}")]
    DegenerateMarginal(f64),

    #[error("expected a 2x2 joint distribution, got {rows}x{cols}")]
    NotBinary { rows: usize, cols: usize },

    #[error("2^n * {param} = {count} is not an integer")]
    NonIntegralCount { param: f64, count: f64 },

    #[error("sampling budget {requested} exceeds the cap of {cap}")]
    BudgetExceeded { requested: usize, cap: usize },

    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
