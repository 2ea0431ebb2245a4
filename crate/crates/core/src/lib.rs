//! Propagation of one- and two-component optical solitons together with the
//! linearized quantum fluctuations around them, and the photon-number
//! correlation observables built from those fluctuations.
//!
//! The crate is organized bottom-up:
//!
//! - [`grid`] owns the periodic time window, the FFT convention and the
//!   spectral-derivative contract shared by every propagator.
//! - [`classical`] builds soliton-pair initial conditions and integrates the
//!   scalar and coupled (two-polarization) cubic Schrödinger equations by
//!   symmetric split-step, recording the full trajectory.
//! - [`quantum`] propagates linearized fluctuations around a stored
//!   trajectory, back-propagates measurement functionals by the discrete
//!   adjoint, and provides a brute-force Green-matrix oracle.
//! - [`correlation`] assembles photon-number covariances, slot-resolved
//!   correlation maps, the two-soliton correlation parameter and the
//!   polarization-component correlation.
//! - [`signal`] holds small series diagnostics (period detection, extrema
//!   counting) used on the z-dependent observables.
//!
//! All quantities are in soliton-normalized units: the scalar equation is
//! `i U_z + U_tt/2 + |U|^2 U = 0` and `sech(t) e^{iz/2}` is its fundamental
//! solution.

pub mod classical;
pub mod correlation;
pub mod error;
pub mod field;
pub mod grid;
pub mod quantum;
pub mod signal;

pub use classical::{
    conserved_quantities, init_scalar_pair, init_vector_pair, propagate_scalar, propagate_vector,
    ConservedQuantities, SolitonPairSpec, Trajectory, VectorPairSpec,
};
pub use correlation::{
    aligned_interval, correlation_map, covariance, covariance_complex, number_functional,
    pair_correlation, pair_correlation_windowed, polarization_pair_correlation,
    total_number_variance, CorrelationMap, FieldComponent, PairCorrelation, SlotPartition,
};
pub use error::Error;
pub use field::ComplexEnvelope;
pub use grid::TimeGrid;
pub use quantum::{
    backpropagate_functional, build_green_matrix, forward_linearized, DoubledField, GreenMatrix,
};

/// Crate-wide result alias.
pub type Result<T> = std::result::Result<T, Error>;
