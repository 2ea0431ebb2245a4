//! Error type shared by every module of the crate.

use thiserror::Error;

#[derive(Debug, Error)]
pub enum Error {
    /// Grid construction rejected the requested discretization.
    #[error("invalid grid: {0}")]
    InvalidGrid(String),

    /// A parameter failed a domain-type invariant (NaN, wrong sign, ...).
    #[error("invalid parameter: {0}")]
    InvalidParameter(String),

    /// Two objects that must share a grid do not.
    #[error("grid mismatch: {0}")]
    GridMismatch(String),

    /// A time interval does not land on grid sample boundaries.
    #[error("misaligned interval: {0}")]
    MisalignedInterval(String),

    /// A requested propagation distance is not a stored checkpoint.
    #[error("z = {z} is not a stored checkpoint (step = {step})")]
    CheckpointNotStored { z: f64, step: f64 },

    /// The functional handed to the adjoint propagator is not Hermitian.
    #[error("functional is not Hermitian: max |minus - conj(plus)| = {deviation:.3e}")]
    NonHermitian { deviation: f64 },

    /// Green-matrix construction refused: cost grows as 2n forward runs.
    #[error(
        "grid too large for the Green-matrix oracle (n = {n}, limit {limit}); \
         use backpropagate_functional for production-size grids"
    )]
    OracleGuard { n: usize, limit: usize },

    /// Propagation produced a non-finite sample.
    #[error("numerical breach at z = {z}: non-finite field sample")]
    NumericalBreach { z: f64 },
}
