use thiserror::Error;

/// Errors raised by the numerical routines of this crate.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("invalid Schur function data: {0}")]
    InvalidSymbol(String),
    #[error("point {re}{im:+}i lies outside the closed upper half-plane")]
    OutsideDomain { re: f64, im: f64 },
    #[error("boundary evaluation at a singular point x = {0}")]
    BoundaryEvaluationAtSingularity(f64),
    #[error("function is not inner (outer factor or non-unimodular constant present)")]
    NotInner,
    #[error("function is not a meromorphic inner function (singular atoms or accumulating zeros present)")]
    NotMeromorphicInner,
    #[error("kernel pole collision at z = {0}")]
    PoleCollision(f64),
    #[error("frequency {re}{im:+}i is not admissible: {reason}")]
    NotAdmissible { re: f64, im: f64, reason: String },
    #[error("duplicate frequency {re}{im:+}i")]
    DuplicateFrequency { re: f64, im: f64 },
    #[error("quadrature did not converge after {nodes} nodes (estimate {estimate}, error {error})")]
    QuadratureNotConverged { nodes: usize, estimate: f64, error: f64 },
    #[error("matrix is not Hermitian (max asymmetry {0:e})")]
    NotHermitian(f64),
    #[error("matrix is not positive semidefinite (min eigenvalue {0:e})")]
    NotPsd(f64),
    #[error("matrix must be square, got {rows}x{cols}")]
    NotSquare { rows: usize, cols: usize },
    #[error("tail index N = {index} out of range 1..={len}")]
    IndexOutOfRange { index: usize, len: usize },
    #[error("head vectors are numerically dependent (min Gram eigenvalue {0:e})")]
    DegenerateHead(f64),
    #[error("Gram matrix is singular (min eigenvalue {0:e})")]
    SingularGram(f64),
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),
    #[error("gamma = {0} must exceed 1/3")]
    GammaOutOfRange(f64),
    #[error("exponent p = {0} must lie in (1, 2)")]
    ExponentOutOfRange(f64),
    #[error("Bernstein weight vanishes at {re}{im:+}i on the segment")]
    WeightVanishesOnSegment { re: f64, im: f64 },
    #[error("segment [{0}, {1}] meets the spectrum of the inner function")]
    SpectrumOnSegment(f64, f64),
    #[error("frequency {re}{im:+}i lies on the real line")]
    BoundaryFrequency { re: f64, im: f64 },
    #[error("zero frequency at index {0}")]
    ZeroFrequency(usize),
    #[error("|b2(lambda)| = 1 at index {0}")]
    DivisorModulusOne(usize),
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),
    #[error("i/o error: {0}")]
    Io(String),
}

impl From<std::io::Error> for Error {
    fn from(e: std::io::Error) -> Self {
        Error::Io(e.to_string())
    }
}

impl From<csv::Error> for Error {
    fn from(e: csv::Error) -> Self {
        Error::Io(e.to_string())
    }
}

pub type Result<T> = std::result::Result<T, Error>;
