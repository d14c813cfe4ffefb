use thiserror::Error;

/// Errors raised across the library.
#[derive(Debug, Error, Clone, PartialEq)]
pub enum Error {
    #[error("signature (r={r}, s={s}, n={n}) is not in the catalog")]
    UnknownSignature { r: usize, s: usize, n: usize },
    #[error("dimension mismatch: expected {expected}, got {got}")]
    DimensionMismatch { expected: usize, got: usize },
    #[error("dilation scale must be positive, got {0}")]
    NonPositiveScale(f64),
    #[error("quadratic form does not have a positive definite real part")]
    NonSPDQuadraticForm,
    #[error("affine map is singular")]
    SingularAffineMap,
    #[error("argument must be positive, got {0}")]
    NonPositiveArgument(f64),
    #[error("kernel is undefined at theta = 0")]
    ThetaZero,
    #[error("point lies on or inside the cone 4|z| >= |P(x)|")]
    OnConeRegion,
    #[error("operation requires n >= 2, got n = {0}")]
    UnsupportedN(usize),
    #[error("operation requires even n, got n = {0}")]
    OddN(usize),
    #[error("Lambda(lambda, k) has a genuine pole at lambda = {0}")]
    PolePosition(String),
    #[error("eta is not timelike: <eta,eta> = {0}")]
    NonTimelikeEta(f64),
    #[error("bump ball is not contained in the timelike cone (min <eta,eta> = {0})")]
    BumpOutsideK(f64),
    #[error("catalog entry invalid: {0}")]
    InvalidCatalog(String),
    #[error("operation requires r = 0")]
    RequiresRZero,
    #[error("operation requires s = 1")]
    RequiresSOne,
    #[error("invalid kernel selector: {0}")]
    InvalidSelector(String),
}

pub type Result<T> = std::result::Result<T, Error>;
