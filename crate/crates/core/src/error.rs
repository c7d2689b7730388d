use thiserror::Error;

/// Errors raised by the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("non-finite state encountered at step {step}")]
    NonFiniteState { step: usize },
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("circle sampling requires dimension 2, got {0}")]
    UnsupportedDimension(usize),
    #[error("sI - A is numerically singular at s = {re} + {im}i")]
    SingularResolvent { re: f64, im: f64 },
    #[error("invalid signal: {0}")]
    InvalidSignal(String),
    #[error("wavelet scale must be nonzero")]
    ZeroScale,
    #[error("scale list is empty")]
    EmptyScales,
    #[error("signal has {0} samples, at least 2 are required")]
    SignalTooShort(usize),
    #[error("wavelet is not admissible (nonzero mean)")]
    NotAdmissible,
    #[error("time {t} lies outside the sampled window [0, {end}]")]
    OutOfWindow { t: f64, end: f64 },
    #[error("length mismatch: {0}")]
    LengthMismatch(String),
    #[error("time step {dt} is not an integer multiple of the sampling interval {sample_dt}")]
    DtNotOnGrid { dt: f64, sample_dt: f64 },
    #[error("shape mismatch: {0}")]
    ShapeMismatch(String),
    #[error("all singular values fall below the truncation threshold")]
    AllSingularValuesTruncated,
    #[error("eigensolver failed to converge")]
    EigenFailure,
    #[error("spectrum has no selectable mode")]
    EmptySpectrum,
    #[error("index {index} out of range for length {len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("no data column recorded for point {0}")]
    ColumnMappingMissing(usize),
    #[error("field value at the anchor point is zero")]
    ZeroAnchor,
    #[error("quadrature scheme mismatch: {0}")]
    SchemeMismatch(String),
    #[error("spectral point must satisfy Re(s) > 0, got {0}")]
    InvalidSpectralPoint(f64),
    #[error("spectral point has zero imaginary part")]
    ZeroFrequency,
    #[error("invalid argument: {0}")]
    InvalidArgument(String),
}

pub type Result<T> = std::result::Result<T, Error>;
