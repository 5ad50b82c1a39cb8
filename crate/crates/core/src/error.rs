use thiserror::Error;

pub type Result<T> = std::result::Result<T, Error>;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("bad .flo magic: expected 202021.25, found {0}")]
    BadMagic(f32),
    #[error("truncated data: expected {expected} bytes, found {actual}")]
    Truncated { expected: usize, actual: usize },
    #[error("bad dimensions {width}x{height}")]
    BadDims { width: i64, height: i64 },
    #[error("non-finite flow component at site {site}")]
    NonFinite { site: usize },
    #[error("label {label} out of range for {k} layers")]
    LabelOutOfRange { label: u8, k: usize },
    #[error("malformed header: {0}")]
    MalformedHeader(String),
    #[error("dimension mismatch: {expected:?} vs {found:?}")]
    DimMismatch {
        expected: (usize, usize),
        found: (usize, usize),
    },
    #[error("degenerate weights: total {total} below required {required}")]
    DegenerateWeights { total: f64, required: f64 },
    #[error("normal equations are not positive definite")]
    SingularSystem,
    #[error("every initialization failed")]
    AllInitsFailed,
    #[error("regions do not partition the grid: site ({x}, {y}) covered {count} times")]
    NonPartition { x: usize, y: usize, count: usize },
    #[error("empty input")]
    Empty,
    #[error("invalid configuration: {0}")]
    InvalidConfig(String),
    #[error("parse error: {0}")]
    Parse(String),
}

impl Error {
    /// Failures of the numerical solvers, as opposed to bad input data.
    pub fn is_numeric(&self) -> bool {
        matches!(
            self,
            Error::DegenerateWeights { .. } | Error::SingularSystem | Error::AllInitsFailed
        )
    }
}
