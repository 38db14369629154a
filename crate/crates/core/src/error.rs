use alloc::string::String;

/// Errors surfaced by generators, solvers and theory evaluators.
#[derive(Debug, Clone, PartialEq, thiserror::Error)]
pub enum Error {
    /// A precondition on an argument was violated (bad dimension, parameter
    /// out of its admissible range, missing metadata).
    #[error("invalid argument: {0}")]
    InvalidArgument(String),

    /// A curvature matrix stopped being numerically positive definite, so the
    /// SPD factorization at inner step `i` of cycle `k` failed. The solver
    /// aborts rather than regularize: a failure here means the problem
    /// violates its declared eigenvalue band.
    #[error("factorization failed at cycle {k}, inner step {i}: accumulated matrix not positive definite")]
    NotPositiveDefinite { k: usize, i: usize },
}

impl Error {
    pub fn invalid(msg: impl Into<String>) -> Self {
        Error::InvalidArgument(msg.into())
    }
}
