use thiserror::Error;

/// Errors surfaced by the solver toolkit.
#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("LP iteration limit reached after {0} pivots")]
    IterationLimit(usize),

    #[error("enumeration budget exceeded: {sequences} sequences > budget {budget}")]
    BudgetExceeded { sequences: f64, budget: f64 },

    #[error("unknown material index {0}")]
    UnknownMaterial(usize),

    #[error("nonphysical input: {0}")]
    Nonphysical(String),

    #[error("csv parse error in {path}: {message}")]
    CsvData { path: String, message: String },

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
