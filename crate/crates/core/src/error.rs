use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch for {what}: expected {expected}, got {got}")]
    DimensionMismatch {
        what: &'static str,
        expected: usize,
        got: usize,
    },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("domain error: {0}")]
    Domain(String),

    /// The local conditioning system of row `row` is not positive definite.
    #[error("conditional variance at row {row} is {value:e}; local correlation system not positive definite")]
    Conditioning { row: usize, value: f64 },

    #[error("singular matrix: {0}")]
    Singular(String),

    #[error("factors were built for different parameters than the ones supplied")]
    StaleFactors,

    #[error("beta[{index}] = {value} lies outside the active set")]
    BetaSupport { index: usize, value: f64 },

    #[error("proposal error: {0}")]
    Proposal(String),

    #[error("numerical error: {0}")]
    Numerical(String),

    #[error("file not found: {0}")]
    FileNotFound(String),

    #[error("{path}: row {row}, column '{column}': {message}")]
    Ingest {
        path: String,
        row: usize,
        column: String,
        message: String,
    },

    #[error("io error: {0}")]
    Io(#[from] std::io::Error),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),
}

impl Error {
    /// True for errors caused by the caller's input rather than by numerics.
    pub fn is_input_error(&self) -> bool {
        matches!(
            self,
            Error::DimensionMismatch { .. }
                | Error::InvalidInput(_)
                | Error::FileNotFound(_)
                | Error::Ingest { .. }
                | Error::Io(_)
                | Error::Csv(_)
        )
    }
}
