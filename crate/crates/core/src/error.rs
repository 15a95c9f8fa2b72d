use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: expected {expected}, got {actual}")]
    DimensionMismatch { expected: usize, actual: usize },

    #[error("non-finite value at coordinate {index}")]
    NonFinite { index: usize },

    #[error("invalid block layout: {0}")]
    InvalidLayout(String),

    #[error("invalid norm power p = {0} (must be >= 1)")]
    InvalidNorm(f64),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("scale {scale} of block {block} is not representable in {bits}-bit floating point")]
    PrecisionLoss { block: usize, scale: f64, bits: u32 },

    #[error("wire stream truncated at bit {position}")]
    Truncated { position: usize },

    #[error("malformed Elias-gamma code at bit {position}")]
    MalformedCode { position: usize },

    #[error("support index {index} overflows block {block} of size {size}")]
    IndexOverflow {
        block: usize,
        index: usize,
        size: usize,
    },

    #[error("invalid scale header {value} in block {block}")]
    InvalidScale { block: usize, value: f64 },

    #[error("{trailing} trailing bits after the last block")]
    TrailingBits { trailing: usize },

    #[error("iterate diverged at iteration {iteration}")]
    Diverged { iteration: usize },

    #[error("problem has no optimum metadata")]
    MissingOptimum,

    #[error("worker {worker}: {source}")]
    Worker {
        worker: usize,
        #[source]
        source: Box<Error>,
    },

    #[error("LIBSVM parse error at line {line}: {message}")]
    Parse { line: usize, message: String },

    #[error("I/O error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;

pub(crate) fn check_dim(expected: usize, actual: usize) -> Result<()> {
    if expected != actual {
        return Err(Error::DimensionMismatch { expected, actual });
    }
    Ok(())
}

pub(crate) fn check_finite(v: &[f64]) -> Result<()> {
    match v.iter().position(|x| !x.is_finite()) {
        Some(index) => Err(Error::NonFinite { index }),
        None => Ok(()),
    }
}
