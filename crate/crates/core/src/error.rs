use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("invalid context: {0}")]
    InvalidContext(String),

    #[error("invalid specification: {0}")]
    InvalidSpec(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("no samples for context {context}, action {action}")]
    MissingCell { context: usize, action: usize },

    #[error("empty pool for context {context}, action {action}")]
    EmptyCell { context: usize, action: usize },

    #[error("numerical failure: {0}")]
    Numerical(String),

    #[error("database file, line {line}: {message}")]
    DatabaseFormat { line: u64, message: String },

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error(transparent)]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Json(#[from] serde_json::Error),
}
