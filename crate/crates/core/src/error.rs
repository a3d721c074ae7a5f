use thiserror::Error;

/// Errors produced by the curvature and geodesic routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid configuration: {0}")]
    Config(String),

    #[error("operation not supported: {0}")]
    Unsupported(String),

    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },

    #[error("degenerate configuration: {0}")]
    DegenerateConfiguration(String),

    #[error(transparent)]
    Parse(#[from] ParseError),

    #[error("domain error in entry {entry}: {message}")]
    Domain { entry: String, message: String },

    #[error("metric is not positive definite at the evaluation point (min eigenvalue {min_eigenvalue:e})")]
    MetricDegenerate { min_eigenvalue: f64 },

    #[error("degenerate plane: Gram determinant {gram:e} below threshold")]
    DegeneratePlane { gram: f64 },

    #[error("Gram system too ill-conditioned (condition number {condition:e})")]
    Conditioning { condition: f64 },

    #[error("geometry degraded: {0}")]
    GeometryDegraded(String),

    #[error("integration diverged after t = {last_good_time}")]
    Divergence { last_good_time: f64 },

    #[error("projection differential is rank deficient at the evaluation point")]
    RankDeficient,
}

/// Failure while parsing a metric expression.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum ParseError {
    #[error("syntax error at offset {offset}: {message}")]
    Syntax { offset: usize, message: String },

    #[error("unknown identifier `{name}` at offset {offset}")]
    UnknownIdentifier { name: String, offset: usize },

    #[error("variable x{index} out of range for dimension {dim} (offset {offset})")]
    VariableOutOfRange {
        index: usize,
        dim: usize,
        offset: usize,
    },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;
