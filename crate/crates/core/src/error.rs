use thiserror::Error;

/// Errors raised by the library. Check failures (axiom violations, uniqueness
/// mismatches) are reported through result structs, not through this type.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("time index {index} out of range (space has {len} times)")]
    TimeIndex { index: usize, len: usize },

    #[error("invalid filtered space: {0}")]
    InvalidSpace(String),

    #[error("invalid probability measure: {0}")]
    InvalidMeasure(String),

    #[error("act is not measurable at time index {time_index}: {detail}")]
    NotMeasurable { time_index: usize, detail: String },

    #[error("acts live at different time indices ({left} vs {right})")]
    IncompatibleTimes { left: usize, right: usize },

    #[error("invalid curve: {0}")]
    InvalidCurve(String),

    #[error("utility value {value} is outside the curve range ({bound})")]
    Range { value: f64, bound: String },

    #[error("invalid utility field: {0}")]
    InvalidField(String),

    #[error("measures are not equivalent: state `{state}` is null under one and not the other")]
    NotEquivalent { state: String },

    #[error("precondition violated: {0}")]
    Precondition(String),

    #[error("bracket search failed: {0}")]
    Bracket(String),

    #[error("recovery failed: {0}")]
    Recovery(String),

    #[error("oracle violates the axioms: {0}")]
    AxiomViolation(String),

    #[error("parse error at line {line}, column {column}: {message}")]
    Parse {
        line: usize,
        column: usize,
        message: String,
    },

    #[error("scenario error: {0}")]
    Scenario(String),

    #[error("i/o error: {0}")]
    Io(String),
}

pub type Result<T> = std::result::Result<T, Error>;

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}
