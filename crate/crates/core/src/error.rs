//! Error type shared across the crate.

use chrono::NaiveDate;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

/// Errors produced by ingestion, diagnostics, model fitting and evaluation.
#[derive(Debug, thiserror::Error)]
pub enum Error {
    /// A date range did not cover at least one full week.
    #[error("invalid range: {0}")]
    InvalidRange(String),

    /// A weekly series violated its construction invariants.
    #[error("invalid series: {0}")]
    InvalidSeries(String),

    /// An outlier spec (or split) referenced a week that is not in the series.
    #[error("unknown week {week} not present in the series")]
    UnknownWeek {
        /// The offending week-start date.
        week: NaiveDate,
    },

    /// A CSV file did not match the expected schema.
    #[error("schema mismatch in {path} at row {row}, column `{column}`: {detail}")]
    CsvSchema {
        /// File being read.
        path: String,
        /// 1-based data row number (header is row 0).
        row: usize,
        /// Column name.
        column: String,
        /// What went wrong.
        detail: String,
    },

    /// A series CSV skipped one or more weeks.
    #[error("gap in weekly series: missing week {missing} (after {previous})")]
    WeekGap {
        /// First missing week-start.
        missing: NaiveDate,
        /// The week preceding the gap.
        previous: NaiveDate,
    },

    /// Not enough history for the requested operation.
    #[error("insufficient data: need at least {required} observations, got {actual}")]
    InsufficientData {
        /// Minimum length required.
        required: usize,
        /// Length supplied.
        actual: usize,
    },

    /// A regression input was degenerate (e.g. a constant series).
    #[error("degenerate regression: {0}")]
    DegenerateRegression(String),

    /// Requested correlogram lag is out of range for the series length.
    #[error("invalid lag {max_lag} for series of length {len}")]
    InvalidLag {
        /// Requested maximum lag.
        max_lag: usize,
        /// Series length.
        len: usize,
    },

    /// Log transform applied to a non-positive value.
    #[error("transform domain error: non-positive value {value} at index {index}")]
    TransformDomain {
        /// Offending index.
        index: usize,
        /// Offending value.
        value: f64,
    },

    /// Exogenous rows do not line up with the series or horizon.
    #[error("exogenous alignment error: {0}")]
    Alignment(String),

    /// Design matrix was rank deficient.
    #[error("rank-deficient design matrix: {0}")]
    RankDeficient(String),

    /// Tensor/vector dimensions inconsistent with the model shape.
    #[error("shape error in {matrix}: expected {expected}, got {actual}")]
    Shape {
        /// Name of the offending matrix or vector.
        matrix: &'static str,
        /// Expected dimension description.
        expected: String,
        /// Actual dimension description.
        actual: String,
    },

    /// Training loss became non-finite.
    #[error("training diverged at epoch {epoch} (learning rate {learning_rate}): loss is not finite")]
    Divergence {
        /// Epoch (1-based) at which the loss left the finite range.
        epoch: usize,
        /// Learning rate in use.
        learning_rate: f64,
    },

    /// A forecaster spec failed validation.
    #[error("invalid forecaster spec: {0}")]
    InvalidSpec(String),

    /// Network failure after the stated number of attempts.
    #[error("network error after {attempts} attempt(s): {detail}")]
    Network {
        /// Attempts made before giving up.
        attempts: u32,
        /// Underlying error description.
        detail: String,
    },

    /// The tracker returned a payload we could not parse.
    #[error("malformed response: {detail}; payload excerpt: {excerpt}")]
    MalformedResponse {
        /// Parse failure description.
        detail: String,
        /// Truncated copy of the offending payload.
        excerpt: String,
    },

    /// A model file had an unknown or incompatible format version.
    #[error("unsupported model format version {0}")]
    UnsupportedFormat(u32),

    /// Malformed persisted model document.
    #[error("invalid model file: {0}")]
    InvalidModelFile(String),

    /// Filesystem error with path context.
    #[error("io error on {path}: {source}")]
    Io {
        /// Path involved.
        path: String,
        /// Underlying error.
        #[source]
        source: std::io::Error,
    },
}

impl Error {
    /// Wraps an I/O error with the path it happened on.
    pub fn io(path: impl Into<String>, source: std::io::Error) -> Self {
        Error::Io {
            path: path.into(),
            source,
        }
    }
}
