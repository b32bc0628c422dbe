//! Well-ordered Floquet eigenbases of time-periodic quantum Hamiltonians.
//!
//! A periodic Hamiltonian `H(t) = Σ_k H^(k) e^{-ikωt}` is diagonalized in the
//! extended (Sambe) space, quasi-energies are folded to a single zone,
//! harmonic duplicates are removed, and resonant subspaces are resolved by
//! diagonalizing the average-energy matrix. The result is an [`Eigenspace`]
//! of triplets `(ε, ε̄, u(t))` ordered by the average energy ε̄, from which
//! propagators, energy spectra, finite-time observed averages, validity-window
//! boundaries and a Davidson-style Ritz ground-state search are derived.

#![cfg_attr(not(feature = "std"), no_std)]

extern crate alloc;

pub mod average;
pub mod dynamics;
pub mod extended;
pub mod model;
pub mod ritz;
pub mod twolevel;

pub use average::{build_eigenspace, EigenTriplet, Eigenspace, FloquetFunction, ResonantGroup};
pub use dynamics::{BoundaryReport, SpectrumGrid, SpectrumLine};
pub use extended::{ExtendedMatrix, RawEigenpair};
pub use model::{
    DrivingSpec, FloquetError, FourierHamiltonian, StateVector, ToleranceConfig,
};
pub use ritz::{ritz_solve, RitzError, RitzIterate, RitzOptions, RitzOutcome};
pub use twolevel::TwoLevelParams;

/// Complex scalar used throughout the crate.
pub type C64 = num_complex::Complex<f64>;
/// Dense complex matrix.
pub type CMatrix = nalgebra::DMatrix<C64>;
/// Dense complex vector.
pub type CVector = nalgebra::DVector<C64>;
