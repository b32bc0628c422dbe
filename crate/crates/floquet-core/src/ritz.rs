//! Davidson-style Floquet-Ritz solver: Rayleigh-Ritz on a growing extended-
//! space subspace, with candidates labeled and selected by the observed
//! average energy rather than the quasi-energy.

use alloc::vec::Vec;
use core::fmt;

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

// float intrinsics under no_std; shadowed by the inherent methods otherwise
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;

use crate::average::{resolve_resonance, resonance_groups, EigenTriplet, ResonantGroup};
use crate::extended::{
    build_extended, eigvec_to_function, fold_to_zone, function_to_eigvec, outer_weight_fraction,
    ExtendedMatrix, RawEigenpair,
};
use crate::model::{FloquetError, FourierHamiltonian, StateVector, ToleranceConfig};
use crate::{C64, CVector};

/// Orthonormal set of extended-space vectors spanning the current search
/// subspace.
#[derive(Debug, Clone)]
pub struct SubspaceBasis {
    vectors: Vec<CVector>,
    iteration: usize,
}

const BREAKDOWN_TOL: f64 = 1e-10;

impl SubspaceBasis {
    /// Start from a single vector; errors on (numerically) zero input.
    pub fn new(seed: CVector) -> Result<Self, FloquetError> {
        Self::from_vectors(alloc::vec![seed])
    }

    /// Orthonormalize (modified Gram-Schmidt, twice) and keep the
    /// independent vectors.
    pub fn from_vectors(vectors: Vec<CVector>) -> Result<Self, FloquetError> {
        let mut basis = Self { vectors: Vec::with_capacity(vectors.len()), iteration: 0 };
        for v in vectors {
            let w = basis.orthogonal_remainder(&v);
            let norm = w.norm();
            if norm > BREAKDOWN_TOL * v.norm().max(1.0) {
                basis.vectors.push(w / C64::from(norm));
            }
        }
        if basis.vectors.is_empty() {
            return Err(FloquetError::NotNormalized { norm: 0.0 });
        }
        Ok(basis)
    }

    pub fn vectors(&self) -> &[CVector] {
        &self.vectors
    }

    pub fn len(&self) -> usize {
        self.vectors.len()
    }

    pub fn is_empty(&self) -> bool {
        self.vectors.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.vectors.first().map_or(0, CVector::len)
    }

    pub fn iteration(&self) -> usize {
        self.iteration
    }

    /// Deviation of the Gram matrix from the identity.
    pub fn orthonormality_defect(&self) -> f64 {
        let mut worst = 0.0f64;
        for (i, v) in self.vectors.iter().enumerate() {
            for (j, w) in self.vectors.iter().enumerate() {
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((v.dotc(w) - C64::from(target)).norm());
            }
        }
        worst
    }

    fn orthogonal_remainder(&self, v: &CVector) -> CVector {
        let mut w = v.clone();
        for _ in 0..2 {
            for q in &self.vectors {
                let c = q.dotc(&w);
                w.axpy(-c, q, C64::new(1.0, 0.0));
            }
        }
        w
    }
}

/// Classic Davidson diagonal preconditioner `(diag(H^F) - ε)^{-1}`.
#[derive(Debug, Clone)]
pub struct DavidsonPreconditioner {
    diagonal: Vec<f64>,
    shift: f64,
}

impl DavidsonPreconditioner {
    pub fn new(matrix: &ExtendedMatrix, shift: f64) -> Self {
        Self { diagonal: matrix.real_diagonal(), shift }
    }

    pub fn apply(&self, r: &CVector) -> CVector {
        CVector::from_iterator(
            r.len(),
            r.iter().zip(&self.diagonal).map(|(z, d)| {
                let mut den = d - self.shift;
                if den.abs() < 1e-8 {
                    den = if den < 0.0 { -1e-8 } else { 1e-8 };
                }
                z / C64::from(den)
            }),
        )
    }
}

/// What [`expand`] did with the preconditioned residual.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExpandOutcome {
    /// Orthogonalized and appended.
    Appended,
    /// The preconditioned residual was already in the span; a seeded random
    /// orthogonal vector was appended instead.
    RandomRestart,
}

/// Precondition the residual, orthogonalize it against the basis and append
/// it. On breakdown (residual in span) a random orthogonal vector replaces
/// it and the event is flagged.
pub fn expand(
    basis: &mut SubspaceBasis,
    residual: &CVector,
    preconditioner: &DavidsonPreconditioner,
    rng: &mut ChaCha8Rng,
) -> Result<ExpandOutcome, FloquetError> {
    if residual.norm() == 0.0 {
        return Err(FloquetError::InvalidParameter(alloc::string::String::from(
            "cannot expand with a zero residual",
        )));
    }
    let t = preconditioner.apply(residual);
    let w = basis.orthogonal_remainder(&t);
    let norm = w.norm();
    if norm > BREAKDOWN_TOL * t.norm() {
        basis.vectors.push(w / C64::from(norm));
        basis.iteration += 1;
        return Ok(ExpandOutcome::Appended);
    }
    for _ in 0..100 {
        let raw = CVector::from_fn(basis.dim(), |_, _| {
            C64::new(rng.random::<f64>() - 0.5, rng.random::<f64>() - 0.5)
        });
        let w = basis.orthogonal_remainder(&raw);
        let norm = w.norm();
        if norm > 1e-6 * raw.norm() {
            basis.vectors.push(w / C64::from(norm));
            basis.iteration += 1;
            return Ok(ExpandOutcome::RandomRestart);
        }
    }
    Err(FloquetError::EigensolveFailed)
}

/// A resolved subspace candidate with its exact full-space residual.
#[derive(Debug, Clone)]
struct Candidate {
    triplet: EigenTriplet,
    vector: CVector,
    residual: CVector,
    residual_norm: f64,
    qualified: bool,
}

fn solve_subspace(
    matrix: &ExtendedMatrix,
    basis: &SubspaceBasis,
    cfg: &ToleranceConfig,
) -> Result<Vec<Candidate>, FloquetError> {
    let s = basis.len();
    let images: Vec<CVector> = basis.vectors().iter().map(|w| matrix.matrix() * w).collect();
    let mut projected = crate::CMatrix::zeros(s, s);
    for i in 0..s {
        for j in 0..s {
            projected[(i, j)] = basis.vectors()[i].dotc(&images[j]);
        }
    }
    let adjoint = projected.adjoint();
    let projected = (projected + adjoint).scale(0.5);
    let eig = nalgebra::SymmetricEigen::try_new(projected, f64::EPSILON, 0)
        .ok_or(FloquetError::EigensolveFailed)?;

    let driving = crate::model::DrivingSpec::new(matrix.omega())?;
    let cutoff = matrix.cutoff();
    let raw: Vec<RawEigenpair> = (0..s)
        .map(|j| {
            let mut x = CVector::zeros(matrix.size());
            for (i, w) in basis.vectors().iter().enumerate() {
                x.axpy(eig.eigenvectors[(i, j)], w, C64::new(1.0, 0.0));
            }
            RawEigenpair {
                quasi_energy: eig.eigenvalues[j],
                function: eigvec_to_function(&x, matrix.dim(), cutoff, driving),
            }
        })
        .collect();
    let folded = fold_to_zone(raw, matrix.omega());

    // quality gate mirrors the dense pipeline's truncation-edge filter
    let quality: Vec<bool> =
        folded.iter().map(|p| outer_weight_fraction(&p.function, cutoff) <= 0.2).collect();
    let keep: Vec<usize> = if quality.iter().any(|&q| q) {
        (0..folded.len()).filter(|&i| quality[i]).collect()
    } else {
        (0..folded.len()).collect()
    };
    let kept: Vec<RawEigenpair> = keep.iter().map(|&i| folded[i].clone()).collect();

    let (groups, singles) = resonance_groups(&kept, cfg);
    let mut triplets = Vec::new();
    for i in singles {
        triplets.push(EigenTriplet::from_function(
            kept[i].quasi_energy,
            kept[i].function.clone(),
            None,
        )?);
    }
    for (id, members) in groups.into_iter().enumerate() {
        let group = ResonantGroup::new(&kept, members)?;
        triplets.extend(resolve_resonance(&group, cfg, Some(id))?);
    }
    triplets.sort_by(|a, b| a.avg_energy.total_cmp(&b.avg_energy));

    let mut out = Vec::with_capacity(triplets.len());
    for triplet in triplets {
        let embedded = function_to_eigvec(&triplet.function, cutoff);
        let norm = embedded.norm();
        if norm < 1e-12 {
            continue;
        }
        let vector = embedded / C64::from(norm);
        let residual = matrix.matrix() * &vector - &vector * C64::from(triplet.quasi_energy);
        let residual_norm = residual.norm();
        let qualified = outer_weight_fraction(&triplet.function, cutoff) <= 0.2;
        out.push(Candidate { triplet, vector, residual, residual_norm, qualified });
    }
    Ok(out)
}

/// Rayleigh-Ritz eigentriplets of the projected matrix, resonance-resolved
/// within the subspace and sorted by average energy.
pub fn project_and_solve(
    matrix: &ExtendedMatrix,
    basis: &SubspaceBasis,
    cfg: &ToleranceConfig,
) -> Result<Vec<EigenTriplet>, FloquetError> {
    Ok(solve_subspace(matrix, basis, cfg)?.into_iter().map(|c| c.triplet).collect())
}

/// Exact full-space residual `(H^F - ε)u` of a candidate triplet.
pub fn residual(
    matrix: &ExtendedMatrix,
    candidate: &EigenTriplet,
) -> Result<(CVector, f64), FloquetError> {
    candidate.function.check_normalized()?;
    let embedded = function_to_eigvec(&candidate.function, matrix.cutoff());
    let norm = embedded.norm();
    if norm == 0.0 {
        return Err(FloquetError::NotNormalized { norm });
    }
    let x = embedded / C64::from(norm);
    let r = matrix.matrix() * &x - &x * C64::from(candidate.quasi_energy);
    let r_norm = r.norm();
    Ok((r, r_norm))
}

/// One step of the Ritz iteration history.
#[derive(Debug, Clone)]
pub struct RitzIterate {
    pub candidate: EigenTriplet,
    pub residual_norm: f64,
    pub converged: bool,
    pub basis_size: usize,
    /// Selected candidate overlaps the previous iterate by less than 0.5.
    pub flip_flop: bool,
    /// A breakdown or thick restart happened since the previous iterate.
    pub restarted: bool,
}

/// Solver knobs; `Default` matches the CLI defaults.
#[derive(Debug, Clone, Copy)]
pub struct RitzOptions {
    pub max_expansions: usize,
    pub seed: u64,
    /// Subspace size triggering a thick restart; `None` picks
    /// `ceil(4 d sqrt(2K+1))`.
    pub max_subspace: Option<usize>,
    /// Candidates kept through a thick restart.
    pub restart_keep: usize,
}

impl Default for RitzOptions {
    fn default() -> Self {
        Self { max_expansions: 128, seed: 0, max_subspace: None, restart_keep: 2 }
    }
}

/// Result of a converged Ritz run.
#[derive(Debug, Clone)]
pub struct RitzOutcome {
    pub history: Vec<RitzIterate>,
    pub triplet: EigenTriplet,
}

#[derive(Debug)]
pub enum RitzError {
    Core(FloquetError),
    NotConverged { history: Vec<RitzIterate> },
}

impl fmt::Display for RitzError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::Core(e) => write!(f, "{e}"),
            Self::NotConverged { history } => {
                write!(f, "no convergence after {} iterations", history.len())
            }
        }
    }
}

#[cfg(feature = "std")]
impl std::error::Error for RitzError {}

impl From<FloquetError> for RitzError {
    fn from(e: FloquetError) -> Self {
        Self::Core(e)
    }
}

fn select_candidate(candidates: &[Candidate], xi: f64) -> usize {
    let pool: Vec<usize> = {
        let qualified: Vec<usize> =
            (0..candidates.len()).filter(|&i| candidates[i].qualified).collect();
        if qualified.is_empty() { (0..candidates.len()).collect() } else { qualified }
    };
    let within: Vec<usize> =
        pool.iter().copied().filter(|&i| candidates[i].residual_norm < xi).collect();
    let ranked = if within.is_empty() { &pool } else { &within };
    *ranked
        .iter()
        .min_by(|&&i, &&j| {
            candidates[i]
                .triplet
                .avg_energy
                .total_cmp(&candidates[j].triplet.avg_energy)
                .then_with(|| candidates[i].residual_norm.total_cmp(&candidates[j].residual_norm))
                .then_with(|| i.cmp(&j))
        })
        .expect("candidate list is never empty")
}

/// Iterate Davidson expansions from `initial_guess` (embedded in the central
/// harmonic block) until the selected candidate has residual norm below ξ
/// and its average energy has stopped moving by more than ξ.
pub fn ritz_solve(
    h: &FourierHamiltonian,
    cfg: &ToleranceConfig,
    initial_guess: &StateVector,
    opts: &RitzOptions,
) -> Result<RitzOutcome, RitzError> {
    let matrix = build_extended(h, cfg)?;
    let mut seed_vec = CVector::zeros(matrix.size());
    seed_vec
        .rows_mut(matrix.block_offset(0), h.dim())
        .copy_from(initial_guess.amplitudes());
    let mut basis = SubspaceBasis::new(seed_vec)?;
    let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
    let max_subspace = opts
        .max_subspace
        .unwrap_or_else(|| {
            (4.0 * h.dim() as f64 * (basis.dim() as f64 / h.dim() as f64).sqrt()).ceil() as usize
        })
        .min(matrix.size())
        .max(2);

    let mut history: Vec<RitzIterate> = Vec::new();
    let mut previous: Option<(CVector, f64)> = None;
    let mut pending_restart = false;
    for step in 0..=opts.max_expansions {
        let candidates = solve_subspace(&matrix, &basis, cfg)?;
        let sel = select_candidate(&candidates, cfg.xi);
        let cand = &candidates[sel];
        let flip_flop = previous
            .as_ref()
            .map_or(false, |(pv, _)| pv.dotc(&cand.vector).norm() < 0.5);
        let avg_change =
            previous.as_ref().map(|(_, pa)| (pa - cand.triplet.avg_energy).abs());
        let converged =
            cand.residual_norm < cfg.xi && avg_change.map_or(true, |delta| delta < cfg.xi);
        history.push(RitzIterate {
            candidate: cand.triplet.clone(),
            residual_norm: cand.residual_norm,
            converged,
            basis_size: basis.len(),
            flip_flop,
            restarted: core::mem::take(&mut pending_restart),
        });
        if converged {
            let triplet = cand.triplet.clone();
            return Ok(RitzOutcome { history, triplet });
        }
        if step == opts.max_expansions {
            break;
        }
        previous = Some((cand.vector.clone(), cand.triplet.avg_energy));
        if basis.len() >= max_subspace {
            // thick restart with the lowest-average-energy candidates
            let keep = opts.restart_keep.max(1).min(candidates.len());
            let vectors: Vec<CVector> =
                candidates.iter().take(keep).map(|c| c.vector.clone()).collect();
            basis = SubspaceBasis::from_vectors(vectors)?;
            pending_restart = true;
            continue;
        }
        let preconditioner = DavidsonPreconditioner::new(&matrix, cand.triplet.quasi_energy);
        if expand(&mut basis, &cand.residual, &preconditioner, &mut rng)?
            == ExpandOutcome::RandomRestart
        {
            pending_restart = true;
        }
    }
    Err(RitzError::NotConverged { history })
}
