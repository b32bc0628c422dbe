//! Domain types shared by all solver stages: the driving specification, the
//! Fourier-component Hamiltonian, tolerances and state vectors.

use alloc::collections::BTreeMap;
use alloc::string::String;
use alloc::vec::Vec;
use core::f64::consts::TAU;
use core::fmt;

use crate::{CMatrix, CVector};

/// Errors produced by construction and solver operations.
#[derive(Debug, Clone, PartialEq)]
pub enum FloquetError {
    /// A stored harmonic `k` has no conjugate partner `-k`.
    MissingConjugatePartner { k: i32 },
    /// `H^(-k)` is not the conjugate transpose of `H^(k)` (or `H^(0)` is not
    /// Hermitian, reported as `k = 0`).
    NonHermitianComponent { k: i32 },
    /// A component matrix is not `d x d`.
    DimensionMismatch { k: i32, rows: usize, cols: usize },
    /// Invalid driving or tolerance parameter.
    InvalidParameter(String),
    /// The Fourier cutoff is smaller than a stored harmonic.
    CutoffTooSmall { harmonic: i32, cutoff: i32 },
    /// Fewer distinct physical states than the Hilbert dimension survived
    /// deduplication.
    TooFewStates { found: usize, expected: usize },
    /// A vector expected to be normalized is not.
    NotNormalized { norm: f64 },
    /// The dense eigensolver did not converge.
    EigensolveFailed,
    /// An operation restricted to the first resonance was called off it.
    OffResonance { rabi: f64, omega: f64 },
    /// Unsupported spectral moment order.
    UnsupportedOrder { order: u32 },
    /// An eigenspace does not hold one triplet per Hilbert dimension.
    IncompleteEigenspace { have: usize, need: usize },
    /// The assembled eigenspace violates physical orthonormality.
    OrthonormalityViolation { deviation: f64 },
}

impl fmt::Display for FloquetError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingConjugatePartner { k } => {
                write!(f, "harmonic {k} is stored without its conjugate partner {}", -k)
            }
            Self::NonHermitianComponent { k } => {
                write!(f, "component pair (H^({k}), H^({})) violates Hermiticity", -k)
            }
            Self::DimensionMismatch { k, rows, cols } => {
                write!(f, "component H^({k}) has shape {rows}x{cols}")
            }
            Self::InvalidParameter(msg) => write!(f, "invalid parameter: {msg}"),
            Self::CutoffTooSmall { harmonic, cutoff } => {
                write!(f, "cutoff {cutoff} cannot hold stored harmonic {harmonic}")
            }
            Self::TooFewStates { found, expected } => write!(
                f,
                "cutoff too small: found {found} distinct physical states, expected {expected}"
            ),
            Self::NotNormalized { norm } => write!(f, "vector norm {norm} is not 1"),
            Self::EigensolveFailed => write!(f, "dense Hermitian eigensolve did not converge"),
            Self::OffResonance { rabi, omega } => {
                write!(f, "operation requires the first resonance (Omega = {rabi}, omega = {omega})")
            }
            Self::UnsupportedOrder { order } => write!(f, "unsupported moment order {order}"),
            Self::IncompleteEigenspace { have, need } => {
                write!(f, "eigenspace holds {have} triplets, need {need}")
            }
            Self::OrthonormalityViolation { deviation } => {
                write!(f, "physical orthonormality violated by {deviation:.3e}")
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for FloquetError {}

/// Periodic driving, `ħ = 1`: energies and angular frequencies share units,
/// times are inverse energies.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DrivingSpec {
    omega: f64,
    period: f64,
}

impl DrivingSpec {
    /// Driving with angular frequency `omega > 0`; the period is `2π/ω`.
    pub fn new(omega: f64) -> Result<Self, FloquetError> {
        if !(omega > 0.0) || !omega.is_finite() {
            return Err(FloquetError::InvalidParameter(String::from(
                "driving frequency must be positive and finite",
            )));
        }
        Ok(Self { omega, period: TAU / omega })
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    pub fn period(&self) -> f64 {
        self.period
    }
}

/// Solver tolerances.
///
/// `xi` is the acceptable energy accuracy: quasi-energies closer than `xi`
/// modulo `ω` are treated as resonant. `fourier_cutoff` is the number of
/// retained harmonics `K` (blocks `-K..K`). `dedup_overlap` is the overlap
/// above which two folded eigenpairs count as harmonic copies of the same
/// physical state, and `degeneracy_tol` breaks average-energy ties.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ToleranceConfig {
    pub xi: f64,
    pub fourier_cutoff: usize,
    pub dedup_overlap: f64,
    pub degeneracy_tol: f64,
}

impl Default for ToleranceConfig {
    fn default() -> Self {
        Self { xi: 1e-6, fourier_cutoff: 8, dedup_overlap: 0.9, degeneracy_tol: 1e-9 }
    }
}

impl ToleranceConfig {
    pub fn validate(&self) -> Result<(), FloquetError> {
        if !(self.xi > 0.0) {
            return Err(FloquetError::InvalidParameter(String::from("xi must be positive")));
        }
        if self.fourier_cutoff < 1 {
            return Err(FloquetError::InvalidParameter(String::from(
                "fourier_cutoff must be at least 1",
            )));
        }
        if !(self.dedup_overlap > 0.5 && self.dedup_overlap <= 1.0) {
            return Err(FloquetError::InvalidParameter(String::from(
                "dedup_overlap must lie in (0.5, 1]",
            )));
        }
        if !(self.degeneracy_tol >= 0.0) {
            return Err(FloquetError::InvalidParameter(String::from(
                "degeneracy_tol must be nonnegative",
            )));
        }
        Ok(())
    }

    pub fn with_xi(mut self, xi: f64) -> Self {
        self.xi = xi;
        self
    }

    pub fn with_cutoff(mut self, cutoff: usize) -> Self {
        self.fourier_cutoff = cutoff;
        self
    }
}

/// One invariant violation found by [`validate_components`].
#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    MissingPartner { k: i32 },
    NonHermitianPair { k: i32, deviation: f64 },
    WrongShape { k: i32, rows: usize, cols: usize },
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::MissingPartner { k } => write!(f, "k={k}: conjugate partner missing"),
            Self::NonHermitianPair { k, deviation } => {
                write!(f, "k={k}: H^(-k) != H^(k)^dag (max deviation {deviation:.3e})")
            }
            Self::WrongShape { k, rows, cols } => write!(f, "k={k}: shape {rows}x{cols}"),
        }
    }
}

/// Validation report for a set of Fourier components; empty iff valid.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_empty(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.violations.is_empty() {
            return write!(f, "valid");
        }
        for (i, v) in self.violations.iter().enumerate() {
            if i > 0 {
                writeln!(f)?;
            }
            write!(f, "{v}")?;
        }
        Ok(())
    }
}

const PAIR_TOL: f64 = 1e-12;

/// Check every stored component against the `FourierHamiltonian` invariants,
/// reporting all violations rather than stopping at the first.
pub fn validate_components(dim: usize, components: &BTreeMap<i32, CMatrix>) -> ValidationReport {
    let mut violations = Vec::new();
    let scale = components
        .values()
        .map(|m| m.iter().map(|z| z.norm()).fold(0.0, f64::max))
        .fold(1.0, f64::max);
    for (&k, mat) in components {
        if mat.nrows() != dim || mat.ncols() != dim {
            violations.push(Violation::WrongShape { k, rows: mat.nrows(), cols: mat.ncols() });
            continue;
        }
        if k < 0 {
            continue; // handled through its positive partner
        }
        if k == 0 {
            let dev = max_abs(&(mat - mat.adjoint()));
            if dev > PAIR_TOL * scale {
                violations.push(Violation::NonHermitianPair { k: 0, deviation: dev });
            }
            continue;
        }
        match components.get(&-k) {
            None => violations.push(Violation::MissingPartner { k }),
            Some(partner) => {
                if partner.nrows() == dim && partner.ncols() == dim {
                    let dev = max_abs(&(partner - mat.adjoint()));
                    if dev > PAIR_TOL * scale {
                        violations.push(Violation::NonHermitianPair { k, deviation: dev });
                    }
                }
            }
        }
    }
    // negative harmonics without a positive partner
    for &k in components.keys() {
        if k < 0 && !components.contains_key(&-k) {
            violations.push(Violation::MissingPartner { k });
        }
    }
    ValidationReport { violations }
}

/// A time-periodic Hamiltonian as a finite set of Fourier components,
/// `H(t) = Σ_k H^(k) e^{-ikωt}` with `H^(-k) = H^(k)^dag`. Missing harmonics
/// are implicitly zero.
#[derive(Debug, Clone, PartialEq)]
pub struct FourierHamiltonian {
    dim: usize,
    components: BTreeMap<i32, CMatrix>,
    driving: DrivingSpec,
}

impl FourierHamiltonian {
    /// Build a Hamiltonian, enforcing Hermiticity pairing and shapes.
    pub fn new(
        dim: usize,
        components: BTreeMap<i32, CMatrix>,
        driving: DrivingSpec,
    ) -> Result<Self, FloquetError> {
        if dim == 0 {
            return Err(FloquetError::InvalidParameter(String::from("dim must be at least 1")));
        }
        let report = validate_components(dim, &components);
        if let Some(v) = report.violations.first() {
            return Err(match *v {
                Violation::MissingPartner { k } => FloquetError::MissingConjugatePartner { k },
                Violation::NonHermitianPair { k, .. } => FloquetError::NonHermitianComponent { k },
                Violation::WrongShape { k, rows, cols } => {
                    FloquetError::DimensionMismatch { k, rows, cols }
                }
            });
        }
        Ok(Self { dim, components, driving })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn driving(&self) -> DrivingSpec {
        self.driving
    }

    pub fn components(&self) -> &BTreeMap<i32, CMatrix> {
        &self.components
    }

    /// Stored component `H^(k)`, or `None` when implicitly zero.
    pub fn component(&self, k: i32) -> Option<&CMatrix> {
        self.components.get(&k)
    }

    /// Largest stored `|k|`.
    pub fn max_harmonic(&self) -> i32 {
        self.components.keys().map(|k| k.abs()).max().unwrap_or(0)
    }

    /// Re-run the invariant checks; empty report iff valid.
    pub fn validate(&self) -> ValidationReport {
        validate_components(self.dim, &self.components)
    }

    /// Assemble `H(t) = Σ_k H^(k) e^{-ikωt}`.
    ///
    /// Hermitian within 1e-12 and `T`-periodic by the pairing invariant.
    pub fn at(&self, t: f64) -> CMatrix {
        let omega = self.driving.omega;
        let mut h = CMatrix::zeros(self.dim, self.dim);
        for (&k, mat) in &self.components {
            let phase = crate::C64::from_polar(1.0, -(k as f64) * omega * t);
            h += mat * phase;
        }
        h
    }
}

/// Free-function form of [`FourierHamiltonian::at`].
pub fn hamiltonian_at(h: &FourierHamiltonian, t: f64) -> CMatrix {
    h.at(t)
}

/// A Hilbert-space amplitude vector.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    amplitudes: CVector,
}

const NORM_TOL: f64 = 1e-10;

impl StateVector {
    /// Wrap amplitudes without any normalization requirement.
    pub fn new(amplitudes: CVector) -> Self {
        Self { amplitudes }
    }

    /// Wrap amplitudes that must already be normalized (within 1e-10).
    pub fn normalized(amplitudes: CVector) -> Result<Self, FloquetError> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > NORM_TOL {
            return Err(FloquetError::NotNormalized { norm });
        }
        Ok(Self { amplitudes })
    }

    /// Rescale to unit norm; errors on the zero vector.
    pub fn normalize(amplitudes: CVector) -> Result<Self, FloquetError> {
        let norm = amplitudes.norm();
        if norm == 0.0 || !norm.is_finite() {
            return Err(FloquetError::NotNormalized { norm });
        }
        Ok(Self { amplitudes: amplitudes / crate::C64::from(norm) })
    }

    pub fn amplitudes(&self) -> &CVector {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }
}

/// Max absolute entry of a complex matrix.
pub(crate) fn max_abs(m: &CMatrix) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}
