use thiserror::Error;

/// Errors raised by the numeric, data and training layers.
#[derive(Debug, Error)]
pub enum KwError {
    #[error("dimension mismatch in {context}: expected {expected}, got {found}")]
    DimensionMismatch {
        context: &'static str,
        expected: String,
        found: String,
    },

    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },

    #[error("non-finite value in {0}")]
    NonFinite(&'static str),

    #[error("matrix is not positive semidefinite: eigenvalue {eigenvalue:e} is below -{ridge:e}")]
    PsdViolation { eigenvalue: f64, ridge: f64 },

    #[error("insufficient data for {context}: need at least {needed} rows, got {got}")]
    InsufficientData {
        context: &'static str,
        needed: usize,
        got: usize,
    },

    #[error("metric undefined: {0}")]
    UndefinedMetric(String),

    #[error("degenerate data: {0}")]
    DegenerateData(String),

    #[error("invalid count: requested {requested}, only {available} available")]
    InvalidCount { requested: usize, available: usize },

    #[error("invalid value for `{name}`: {reason}")]
    InvalidParameter { name: &'static str, reason: String },

    #[error("label {label} at row {row} is out of range for {classes} classes")]
    LabelOutOfRange { row: usize, label: usize, classes: usize },

    #[error("split is empty")]
    EmptySplit,

    #[error("bad magic bytes: expected \"KWEM\", found {found:?}")]
    BadMagic { found: [u8; 4] },

    #[error("unsupported embedding file version {0}")]
    UnsupportedVersion(u16),

    #[error("truncated embedding file: expected {expected} bytes, found {actual}")]
    Truncated { expected: u64, actual: u64 },

    #[error("embedding file has {extra} unexpected trailing bytes")]
    TrailingBytes { extra: u64 },

    #[error("malformed embedding file: {0}")]
    Malformed(String),

    #[error("csv error: {0}")]
    Csv(#[from] csv::Error),

    #[error(transparent)]
    Io(#[from] std::io::Error),

    #[error("training failed at epoch {epoch}, step {step} ({stage}): {source}")]
    Step {
        epoch: usize,
        step: usize,
        stage: &'static str,
        #[source]
        source: Box<KwError>,
    },
}

pub type Result<T> = std::result::Result<T, KwError>;

impl KwError {
    pub(crate) fn dims(context: &'static str, expected: impl ToString, found: impl ToString) -> Self {
        KwError::DimensionMismatch {
            context,
            expected: expected.to_string(),
            found: found.to_string(),
        }
    }

    pub(crate) fn param(name: &'static str, reason: impl Into<String>) -> Self {
        KwError::InvalidParameter {
            name,
            reason: reason.into(),
        }
    }
}
