use thiserror::Error;

/// Error type shared by every module of the crate.
#[derive(Debug, Error)]
pub enum Error {
    #[error("domain error: {0}")]
    Domain(String),

    #[error("length mismatch: expected {expected}, got {got}")]
    LengthMismatch { expected: usize, got: usize },

    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("matrix is not unitary: max deviation {max_dev:.3e} exceeds {tol:.1e}")]
    NotUnitary { max_dev: f64, tol: f64 },

    #[error("state is not normalized: |norm^2 - 1| = {dev:.3e}")]
    NotNormalized { dev: f64 },

    #[error("invalid probability distribution: {0}")]
    InvalidDistribution(String),

    #[error("resource guard: {needed} amplitudes exceed the limit of {limit}")]
    ResourceGuard { needed: u128, limit: u64 },
}

pub type Result<T> = std::result::Result<T, Error>;
