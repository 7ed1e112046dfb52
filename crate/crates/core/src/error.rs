use thiserror::Error;

pub type Result<T, E = Error> = std::result::Result<T, E>;

#[derive(Debug, Error)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("cholesky factorization failed (final jitter {jitter:e})")]
    Factorization { jitter: f64 },

    #[error("candidate pool exhausted: no eligible candidates left")]
    PoolExhausted,

    #[error("candidate pool too small: need at least {required} points, have {available}")]
    InsufficientPool { required: usize, available: usize },

    #[error("traces cannot be aggregated: {0}")]
    MismatchedTraces(String),

    #[error(transparent)]
    PoolCsv(#[from] PoolCsvError),

    #[error("iteration {iteration}: {source}")]
    AtIteration {
        iteration: usize,
        #[source]
        source: Box<Error>,
    },
}

impl Error {
    pub(crate) fn at_iteration(self, iteration: usize) -> Self {
        Error::AtIteration {
            iteration,
            source: Box::new(self),
        }
    }
}

/// Failures while reading a candidate-pool CSV file. Rows are 1-based file
/// lines (the header is row 1); columns are 1-based.
#[derive(Debug, Error)]
pub enum PoolCsvError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },

    #[error("{path}: file contains no data rows")]
    Empty { path: String },

    #[error("{path}: need at least one feature column and one label column, found {columns}")]
    TooFewColumns { path: String, columns: usize },

    #[error("{path}: row {row} has {found} columns, expected {expected}")]
    Ragged {
        path: String,
        row: u64,
        expected: usize,
        found: usize,
    },

    #[error("{path}: non-numeric cell {value:?} at row {row}, column {column}")]
    NonNumeric {
        path: String,
        row: u64,
        column: usize,
        value: String,
    },

    #[error("{path}: malformed csv: {message}")]
    Malformed { path: String, message: String },
}
