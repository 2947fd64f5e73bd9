use thiserror::Error;

/// Errors produced by the FQI library.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("fragment dimension {d} does not divide embedding dimension {n}")]
    NonDivisible { n: usize, d: usize },
    #[error("bits per fragment must be in 1..=16, got {0}")]
    BitsOutOfRange(u32),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("probability {0} out of range")]
    OutOfRange(f64),
    #[error("channel has zero capacity")]
    ZeroCapacity,
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },
    #[error("length mismatch: expected {expected}, got {actual}")]
    LengthMismatch { expected: usize, actual: usize },
    #[error("empty input")]
    Empty,
    #[error("need at least {needed} distinct fragments, found {found}")]
    InsufficientData { needed: usize, found: usize },
    #[error("cosine similarity undefined for a zero vector")]
    ZeroVector,
    #[error("class {0} has fewer than two items")]
    ClassTooSmall(usize),
    #[error("training loss became non-finite at epoch {0}")]
    NonFiniteLoss(usize),
    #[error("observed BER {observed} exceeds benchmark grid maximum {max}")]
    BerOutOfRange { observed: f64, max: f64 },
    #[error("unknown benchmark {0:?}")]
    UnknownBenchmark(String),
    #[error("no configuration meets the SSLA")]
    NoFeasibleConfig,
    #[error("parse error at line {line}: {msg}")]
    Parse { line: usize, msg: String },
}

pub type Result<T, E = Error> = std::result::Result<T, E>;

pub(crate) fn parse_err(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse {
        line,
        msg: msg.into(),
    }
}
