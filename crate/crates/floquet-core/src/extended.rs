//! Truncated extended (Sambe) space: build the block Floquet matrix,
//! diagonalize it, fold quasi-energies to one zone, and remove the harmonic
//! copies so that exactly one representative per physical state survives.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

// float intrinsics under no_std; shadowed by the inherent methods otherwise
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;

use crate::average::FloquetFunction;
use crate::model::{max_abs, FloquetError, FourierHamiltonian, ToleranceConfig};
use crate::{C64, CMatrix, CVector};

/// The truncated Floquet Hamiltonian `H^F` as a dense `D x D` Hermitian
/// matrix, `D = d(2K+1)`.
///
/// Block index `b ∈ -K..K` labels the Fourier basis row `e^{+ibωt}`, so the
/// diagonal block is `H^(0) + bω·1` and the eigenvector block `b` holds the
/// coefficient `u^(-b)`. Off-diagonal blocks couple rows `b` and `b'` through
/// `H^(b'-b)`.
#[derive(Debug, Clone)]
pub struct ExtendedMatrix {
    matrix: CMatrix,
    dim: usize,
    cutoff: i32,
    omega: f64,
}

impl ExtendedMatrix {
    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    /// Hilbert-space dimension `d`.
    pub fn dim(&self) -> usize {
        self.dim
    }

    /// Harmonic cutoff `K`.
    pub fn cutoff(&self) -> i32 {
        self.cutoff
    }

    pub fn omega(&self) -> f64 {
        self.omega
    }

    /// Extended dimension `D = d(2K+1)`.
    pub fn size(&self) -> usize {
        self.matrix.nrows()
    }

    /// Row offset of block `b`.
    pub fn block_offset(&self, b: i32) -> usize {
        debug_assert!(b.abs() <= self.cutoff);
        (b + self.cutoff) as usize * self.dim
    }

    /// Copy of block `(b, b')`.
    pub fn block(&self, b: i32, b_prime: i32) -> CMatrix {
        self.matrix
            .view((self.block_offset(b), self.block_offset(b_prime)), (self.dim, self.dim))
            .into_owned()
    }

    /// Real diagonal of the matrix (`H^(0)` diagonal plus the `bω` shifts).
    pub fn real_diagonal(&self) -> Vec<f64> {
        (0..self.size()).map(|i| self.matrix[(i, i)].re).collect()
    }
}

/// One raw (unordered, possibly duplicated) eigenpair of the truncated
/// extended matrix.
#[derive(Debug, Clone)]
pub struct RawEigenpair {
    pub quasi_energy: f64,
    pub function: FloquetFunction,
}

/// Assemble the truncated extended matrix for cutoff `K = cfg.fourier_cutoff`.
///
/// Errors when the cutoff cannot hold a stored harmonic.
pub fn build_extended(
    h: &FourierHamiltonian,
    cfg: &ToleranceConfig,
) -> Result<ExtendedMatrix, FloquetError> {
    cfg.validate()?;
    let cutoff = cfg.fourier_cutoff as i32;
    let max_h = h.max_harmonic();
    if cutoff < max_h {
        return Err(FloquetError::CutoffTooSmall { harmonic: max_h, cutoff });
    }
    let d = h.dim();
    let omega = h.driving().omega();
    let size = d * (2 * cutoff as usize + 1);
    let mut matrix = CMatrix::zeros(size, size);
    for b in -cutoff..=cutoff {
        let row = (b + cutoff) as usize * d;
        // diagonal block H^(0) + b omega
        if let Some(h0) = h.component(0) {
            matrix.view_mut((row, row), (d, d)).copy_from(h0);
        }
        for i in 0..d {
            matrix[(row + i, row + i)] += C64::from(b as f64 * omega);
        }
        // coupling blocks: (b, b + k) holds H^(k)
        for (&k, mat) in h.components() {
            if k == 0 {
                continue;
            }
            let bp = b + k;
            if bp.abs() > cutoff {
                continue;
            }
            let col = (bp + cutoff) as usize * d;
            matrix.view_mut((row, col), (d, d)).copy_from(mat);
        }
    }
    Ok(ExtendedMatrix { matrix, dim: d, cutoff, omega })
}

/// Read the Fourier coefficients of an extended-space column vector:
/// coefficient `u^(k)` lives in block `b = -k`.
pub fn eigvec_to_function(
    vector: &CVector,
    dim: usize,
    cutoff: i32,
    driving: crate::model::DrivingSpec,
) -> FloquetFunction {
    let mut coefficients = BTreeMap::new();
    for k in -cutoff..=cutoff {
        let offset = (cutoff - k) as usize * dim;
        let seg = vector.rows(offset, dim).into_owned();
        coefficients.insert(k, seg);
    }
    FloquetFunction::new(coefficients, driving).expect("segments share the dimension")
}

/// Embed a Floquet function back into the truncated extended space;
/// coefficients beyond the cutoff are dropped.
pub fn function_to_eigvec(f: &FloquetFunction, cutoff: i32) -> CVector {
    let dim = f.dim();
    let mut v = CVector::zeros(dim * (2 * cutoff as usize + 1));
    for (&k, coeff) in f.coefficients() {
        if k.abs() > cutoff {
            continue;
        }
        let offset = (cutoff - k) as usize * dim;
        v.rows_mut(offset, dim).copy_from(coeff);
    }
    v
}

/// Dense Hermitian eigensolve of the extended matrix; eigenpairs ascending in
/// the raw quasi-energy `ε'`.
pub fn diagonalize_extended(m: &ExtendedMatrix) -> Result<Vec<RawEigenpair>, FloquetError> {
    debug_assert!(max_abs(&(m.matrix() - m.matrix().adjoint())) < 1e-12);
    let eig = nalgebra::SymmetricEigen::try_new(m.matrix.clone(), f64::EPSILON, 0)
        .ok_or(FloquetError::EigensolveFailed)?;
    let driving = crate::model::DrivingSpec::new(m.omega)?;
    let mut pairs: Vec<RawEigenpair> = (0..m.size())
        .map(|j| RawEigenpair {
            quasi_energy: eig.eigenvalues[j],
            function: eigvec_to_function(
                &eig.eigenvectors.column(j).clone_owned(),
                m.dim,
                m.cutoff,
                driving,
            ),
        })
        .collect();
    pairs.sort_by(|a, b| a.quasi_energy.total_cmp(&b.quasi_energy));
    Ok(pairs)
}

/// Map `x` to the symmetric zone `[-ω/2, ω/2)`.
pub fn mod_zone(x: f64, omega: f64) -> f64 {
    crate::average::fold_quasi_energy(x, omega).0
}

/// Fold every raw quasi-energy into `[-ω/2, ω/2)`, shifting the paired
/// Fourier coefficients by the same number of harmonics so the physical
/// state is unchanged.
pub fn fold_to_zone(pairs: Vec<RawEigenpair>, omega: f64) -> Vec<RawEigenpair> {
    pairs
        .into_iter()
        .map(|pair| {
            let (eps, l) = crate::average::fold_quasi_energy(pair.quasi_energy, omega);
            let function =
                if l == 0 { pair.function } else { pair.function.harmonic_shifted(-l) };
            RawEigenpair { quasi_energy: eps, function }
        })
        .collect()
}

/// Fraction of extended-space weight a function keeps in the outermost
/// harmonic blocks `|k| >= K` (including weight shifted past the cutoff by
/// folding). High values mark truncation-edge artifacts.
pub(crate) fn outer_weight_fraction(f: &FloquetFunction, cutoff: i32) -> f64 {
    let total = f.norm_sq();
    if total == 0.0 {
        return 1.0;
    }
    let outer: f64 = f
        .coefficients()
        .iter()
        .filter(|(&k, _)| k.abs() >= cutoff)
        .map(|(_, v)| v.norm_squared())
        .sum();
    outer / total
}

/// Fraction of weight within the central harmonics `|k| <= K/2`; harmonic
/// copies with the most central weight are the least truncation-contaminated.
fn central_weight_fraction(f: &FloquetFunction, cutoff: i32) -> f64 {
    let total = f.norm_sq();
    if total == 0.0 {
        return 0.0;
    }
    let half = cutoff / 2;
    let central: f64 = f
        .coefficients()
        .iter()
        .filter(|(&k, _)| k.abs() <= half)
        .map(|(_, v)| v.norm_squared())
        .sum();
    central / total
}

const EDGE_WEIGHT_LIMIT: f64 = 0.2;

/// Reduce a folded eigenpair list to exactly `dim` representatives, one per
/// physical state.
///
/// Candidates with more than 20% of their weight in the outermost harmonic
/// blocks are discarded as truncation artifacts. The rest are ranked by
/// central Fourier weight and accepted greedily; a candidate is rejected as a
/// harmonic copy when its physical state at `t = 0` projects onto the span of
/// the accepted ones by at least `dedup_overlap`, or when a harmonic-shifted
/// extended-space overlap with an accepted survivor reaches the same bound.
pub fn deduplicate_harmonics(
    pairs: &[RawEigenpair],
    cfg: &ToleranceConfig,
    dim: usize,
) -> Result<Vec<RawEigenpair>, FloquetError> {
    let cutoff = cfg.fourier_cutoff as i32;
    let mut candidates: Vec<usize> = (0..pairs.len())
        .filter(|&i| outer_weight_fraction(&pairs[i].function, cutoff) <= EDGE_WEIGHT_LIMIT)
        .collect();
    candidates.sort_by(|&i, &j| {
        let ci = central_weight_fraction(&pairs[i].function, cutoff);
        let cj = central_weight_fraction(&pairs[j].function, cutoff);
        cj.total_cmp(&ci)
            .then_with(|| pairs[i].quasi_energy.abs().total_cmp(&pairs[j].quasi_energy.abs()))
            .then_with(|| i.cmp(&j))
    });

    let mut survivors: Vec<usize> = Vec::with_capacity(dim);
    // orthonormal basis of the accepted physical span, for the projection test
    let mut span: Vec<CVector> = Vec::with_capacity(dim);
    for &i in &candidates {
        if survivors.len() == dim {
            break;
        }
        let f = &pairs[i].function;
        let psi = f.at_zero();
        let norm = psi.norm();
        if norm < 1e-8 {
            continue;
        }
        let psi = psi / C64::from(norm);
        let projection: f64 =
            span.iter().map(|q| q.dotc(&psi).norm_sqr()).sum::<f64>().sqrt().min(1.0);
        if projection >= cfg.dedup_overlap {
            continue;
        }
        let shift_dup = survivors.iter().any(|&j| {
            let g = &pairs[j].function;
            let scale = (f.norm_sq() * g.norm_sq()).sqrt();
            (-2 * cutoff..=2 * cutoff)
                .any(|l| g.shifted_dot(f, l).norm() / scale >= cfg.dedup_overlap)
        });
        if shift_dup {
            continue;
        }
        // extend the span basis (Gram-Schmidt on the physical vectors)
        let mut q = psi.clone();
        for b in &span {
            let c = b.dotc(&q);
            q.axpy(-c, b, C64::new(1.0, 0.0));
        }
        let qn = q.norm();
        if qn > 1e-8 {
            span.push(q / C64::from(qn));
        }
        survivors.push(i);
    }

    if survivors.len() < dim {
        return Err(FloquetError::TooFewStates { found: survivors.len(), expected: dim });
    }
    let mut out: Vec<RawEigenpair> = survivors
        .into_iter()
        .map(|i| {
            let f = pairs[i].function.normalized().expect("survivor has weight");
            Ok(RawEigenpair { quasi_energy: pairs[i].quasi_energy, function: f })
        })
        .collect::<Result<_, FloquetError>>()?;
    out.sort_by(|a, b| a.quasi_energy.total_cmp(&b.quasi_energy));
    Ok(out)
}
