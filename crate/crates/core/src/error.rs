use thiserror::Error;

/// Errors surfaced by graph construction, the spectral oracle, filtering and clustering.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("block {0} has no members")]
    EmptyBlock(usize),

    #[error("block matrix is not symmetric at ({0}, {1})")]
    AsymmetricBlocks(usize, usize),

    #[error("block matrix is rank deficient (sigma_min / sigma_max = {0:e})")]
    RankDeficient(f64),

    #[error("vertex {0} is isolated (degree 0)")]
    IsolatedVertex(usize),

    #[error("vertex {0} has zero expected degree")]
    ZeroExpectedDegree(usize),

    #[error("matrix of size {n} exceeds the dense limit {limit}")]
    OverDenseLimit { n: usize, limit: usize },

    #[error("matrix is not symmetric (max asymmetry {0:e})")]
    NotSymmetric(f64),

    #[error("eigendecomposition requested inside an eigen-free section")]
    EigenForbidden,

    #[error("count {count} out of range 1..={max}")]
    OutOfRange { count: usize, max: usize },

    #[error(
        "bisection non-convergent: filtered energy is not monotone over the final probes; raise the polynomial order"
    )]
    NonConvergent,

    #[error("spectrum is empty")]
    EmptySpectrum,

    #[error("parse error on line {line}: {msg}")]
    Parse { line: usize, msg: String },

    #[error("io error: {0}")]
    Io(String),

    #[error("resampling limit reached after {0} attempts")]
    ResampleLimit(usize),
}

impl From<std::io::Error> for Error {
    fn from(err: std::io::Error) -> Self {
        Error::Io(err.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
