use thiserror::Error;

/// Errors raised while validating inputs or running the numerical routines.
#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("volatility of asset {asset} must be positive, got {value}")]
    NonPositiveVol { asset: usize, value: f64 },

    #[error("correlation matrix is not positive definite: {0}")]
    NotPositiveDefinite(String),

    #[error("volatility matrix is singular")]
    SingularSigma,

    #[error("penalized covariance system is singular")]
    SingularSystem,

    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    #[error("CIR scheme invalid for asset {asset}: lambda^2 = {lambda_sq} exceeds 4*kappa*mean = {bound}")]
    SchemeInvalid {
        asset: usize,
        lambda_sq: f64,
        bound: f64,
    },

    #[error("RK4 step-halving check failed: discrepancy {discrepancy:e} exceeds tolerance {tolerance:e}")]
    StepTooCoarse { discrepancy: f64, tolerance: f64 },

    #[error("wealth must be positive, got {0}")]
    NonPositiveWealth(f64),

    #[error("cap order violated: floor {floor} exceeds cap {cap}")]
    CapOrderViolation { floor: f64, cap: f64 },

    #[error("integrated variance must be positive, got {0}")]
    DegenerateVariance(f64),

    #[error("configuration mismatch: {0}")]
    ConfigMismatch(String),
}

pub type Result<T> = std::result::Result<T, Error>;
