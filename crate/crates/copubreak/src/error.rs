//! Crate-wide error type.
//!
//! Every fallible operation in the library returns [`Error`]; the CLI maps
//! usage problems (flag grammar) to exit code 2 and domain problems (data,
//! numerics) to exit code 1.

use thiserror::Error;

/// Convenience alias used throughout the crate.
pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error)]
pub enum Error {
    // ---- panel ingestion -------------------------------------------------
    #[error("i/o failure: {source}")]
    IoFailure {
        #[from]
        source: std::io::Error,
    },

    #[error("unparseable cell at row {row}, column {col}: {content:?}")]
    UnparseableCell {
        /// 1-based data row (header excluded).
        row: usize,
        /// 1-based column within the file.
        col: usize,
        content: String,
    },

    #[error("dates are not strictly increasing at row {row}")]
    NonMonotoneDates { row: usize },

    #[error("panel has {found} value column(s); at least {required} required")]
    TooFewColumns { found: usize, required: usize },

    #[error("panel has {found} row(s); at least {required} required")]
    TooFewRows { found: usize, required: usize },

    #[error("non-positive price {value} at row {row}, column {col}; log-returns undefined")]
    NonPositivePrice { row: usize, col: usize, value: f64 },

    // ---- marginal filtering ----------------------------------------------
    #[error("column {column:?} is degenerate (zero variance or non-finite values)")]
    DegenerateSeries { column: String },

    // ---- dependence measures ----------------------------------------------
    #[error("tied values detected in column {column:?}; continuous margins assumed \
             (enable deterministic jitter to break ties)")]
    TiesDetected { column: String },

    #[error("trimmed grid starts at t = {start} but at least {required} observations \
             are required (max of 10 and 1/min(q, 1-q) over quantile levels)")]
    TrimTooSmall { start: usize, required: usize },

    #[error("quantile level {level} outside the open interval (0, 1)")]
    LevelOutOfRange { level: f64 },

    #[error("invalid measure specification {spec:?}: {reason}")]
    InvalidMeasureSpec { spec: String, reason: String },

    // ---- CUSUM -------------------------------------------------------------
    #[error("dependence path is empty; nothing to maximise over")]
    EmptyPath,

    // ---- bootstrap ----------------------------------------------------------
    #[error("bootstrap requires at least {required} replicate(s), got {found}")]
    InsufficientReplicates { found: usize, required: usize },

    #[error("segment [{lo}, {hi}] has {len} rows but the trimmed grid needs {required}; \
             break too close to an edge for interval construction")]
    SegmentTooShort {
        lo: usize,
        hi: usize,
        len: usize,
        required: usize,
    },

    // ---- simulators ---------------------------------------------------------
    #[error("unsupported copula family {family:?}: {reason}")]
    UnsupportedFamily { family: String, reason: String },

    #[error("invalid parameter {name} = {value} for {context}: {reason}")]
    InvalidParameter {
        name: String,
        value: f64,
        context: String,
        reason: String,
    },

    // ---- scan / study --------------------------------------------------------
    #[error("window of {window} rows is too short: {reason}")]
    WindowTooShort { window: usize, reason: String },

    // ---- generic configuration ------------------------------------------------
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
}

impl Error {
    /// True when the error stems from how the user invoked the tool (grammar,
    /// flag values) rather than from the data or the numerics.
    pub fn is_usage(&self) -> bool {
        matches!(
            self,
            Error::InvalidMeasureSpec { .. }
                | Error::LevelOutOfRange { .. }
                | Error::UnsupportedFamily { .. }
                | Error::InvalidConfig(_)
        )
    }
}
