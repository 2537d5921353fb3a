use thiserror::Error;

/// Errors raised across colorimetry, estimation and I/O.
#[derive(Debug, Error)]
pub enum Error {
    #[error("degenerate sample: {0}")]
    DegenerateSample(String),

    #[error("invalid white point: components must be finite and positive")]
    InvalidWhitePoint,

    #[error("mapped point lies at infinity")]
    PointAtInfinity,

    #[error("degenerate point configuration")]
    DegenerateConfiguration,

    #[error("need at least {needed} correspondences, got {got}")]
    InsufficientPoints { needed: usize, got: usize },

    #[error("matrix is singular")]
    SingularMatrix,

    #[error("source matrix is rank deficient")]
    RankDeficient,

    #[error("every sampled subset was degenerate")]
    NoValidSample,

    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),

    #[error("invalid configuration: {0}")]
    InvalidConfig(String),

    #[error("parse error at line {line}: {message}")]
    Parse { line: u64, message: String },

    #[error("missing column `{0}`")]
    MissingColumn(String),

    #[error("patch `{0}` has no gray reference")]
    MissingGrayReference(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
