use thiserror::Error;

/// Errors surfaced by the model, quadrature, and solver layers.
#[derive(Debug, Error)]
pub enum Error {
    /// A constructor argument violated a documented constraint.
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// The premium income does not dominate the expected claim outflow.
    #[error("net profit condition violated: c = {c} must exceed lambda * mean claim = {load}")]
    NetProfit { c: f64, load: f64 },

    /// A semi-infinite integral or series could not be truncated with a
    /// certified remainder below the requested bound.
    #[error("truncation cannot be certified: {0}")]
    Truncation(String),

    /// A quadrature produced a non-finite value or failed to refine.
    #[error("quadrature failure: {0}")]
    Quadrature(String),

    /// Root finding could not bracket a sign change.
    #[error("root not bracketed: {0}")]
    RootNotBracketed(String),

    /// An iterative computation was asked for an order whose prerequisites
    /// have not been computed yet.
    #[error("dependency missing: {0}")]
    DependencyMissing(String),

    /// Quadrature cancellation produced a negative density beyond the
    /// tolerated slack (values above -1e-12 are clamped, not reported).
    #[error("negative density {value:e} at {location}")]
    NegativeDensity { value: f64, location: String },

    /// Malformed tabulated-distribution input.
    #[error("claim table: {0}")]
    ClaimTable(String),

    #[error(transparent)]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;
