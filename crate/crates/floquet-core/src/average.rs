//! Effective and infinite-time average energies, resonance-group resolution,
//! and assembly of the well-ordered eigenspace.
//!
//! Quasi-energies only label Floquet states modulo harmonic shifts, so the
//! eigenbasis is ordered here by the average energy `ε̄ = ε + Σ_k kω‖u^(k)‖²`
//! instead. Within a resonant subspace (quasi-energies equal modulo ω up to
//! the tolerance ξ) the eigenfunctions are fixed by diagonalizing the matrix
//! `M_ab = Σ_k kω⟨u_a^(k)|u_b^(k)⟩`, which maximally separates the average
//! energies of the resolved states.

use alloc::collections::BTreeMap;
use alloc::vec::Vec;

// float intrinsics under no_std; shadowed by the inherent methods otherwise
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;

use crate::extended::{
    build_extended, deduplicate_harmonics, diagonalize_extended, fold_to_zone, mod_zone,
    RawEigenpair,
};
use crate::model::{DrivingSpec, FloquetError, FourierHamiltonian, ToleranceConfig};
use crate::{C64, CMatrix, CVector};

/// Extended-space norm tolerance for functions flagged normalized.
pub(crate) const FUNCTION_NORM_TOL: f64 = 1e-10;

/// A periodic eigenfunction `u(t) = Σ_k u^(k) e^{-ikωt}` as its Fourier
/// coefficient vectors.
#[derive(Debug, Clone, PartialEq)]
pub struct FloquetFunction {
    coefficients: BTreeMap<i32, CVector>,
    driving: DrivingSpec,
    dim: usize,
}

impl FloquetFunction {
    pub fn new(
        coefficients: BTreeMap<i32, CVector>,
        driving: DrivingSpec,
    ) -> Result<Self, FloquetError> {
        let dim = match coefficients.values().next() {
            Some(v) => v.len(),
            None => {
                return Err(FloquetError::InvalidParameter(alloc::string::String::from(
                    "a Floquet function needs at least one Fourier coefficient",
                )))
            }
        };
        for (&k, v) in &coefficients {
            if v.len() != dim {
                return Err(FloquetError::DimensionMismatch { k, rows: v.len(), cols: 1 });
            }
        }
        Ok(Self { coefficients, driving, dim })
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn driving(&self) -> DrivingSpec {
        self.driving
    }

    pub fn coefficients(&self) -> &BTreeMap<i32, CVector> {
        &self.coefficients
    }

    pub fn coefficient(&self, k: i32) -> Option<&CVector> {
        self.coefficients.get(&k)
    }

    /// Harmonic weight `‖u^(k)‖²`.
    pub fn weight(&self, k: i32) -> f64 {
        self.coefficients.get(&k).map_or(0.0, |v| v.norm_squared())
    }

    /// Extended-space squared norm `Σ_k ‖u^(k)‖²`.
    pub fn norm_sq(&self) -> f64 {
        self.coefficients.values().map(|v| v.norm_squared()).sum()
    }

    pub(crate) fn check_normalized(&self) -> Result<(), FloquetError> {
        let n = self.norm_sq();
        if (n - 1.0).abs() > FUNCTION_NORM_TOL {
            return Err(FloquetError::NotNormalized { norm: n.sqrt() });
        }
        Ok(())
    }

    /// Extended-space inner product `⟨⟨self|other⟩⟩_T = Σ_k ⟨self^(k)|other^(k)⟩`.
    pub fn extended_dot(&self, other: &Self) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, v) in &self.coefficients {
            if let Some(w) = other.coefficients.get(k) {
                acc += v.dotc(w);
            }
        }
        acc
    }

    /// Overlap with `other` whose coefficients are read shifted by `l`:
    /// `Σ_k ⟨self^(k+l)|other^(k)⟩`.
    pub fn shifted_dot(&self, other: &Self, l: i32) -> C64 {
        let mut acc = C64::new(0.0, 0.0);
        for (k, w) in &other.coefficients {
            if let Some(v) = self.coefficients.get(&(k + l)) {
                acc += v.dotc(w);
            }
        }
        acc
    }

    /// Evaluate `u(t) = Σ_k u^(k) e^{-ikωt}`.
    pub fn at(&self, t: f64) -> CVector {
        let omega = self.driving.omega();
        let mut out = CVector::zeros(self.dim);
        for (&k, v) in &self.coefficients {
            let phase = C64::from_polar(1.0, -(k as f64) * omega * t);
            out.axpy(phase, v, C64::new(1.0, 0.0));
        }
        out
    }

    /// The physical state at `t = 0`, `Ψ(0) = Σ_k u^(k)`.
    pub fn at_zero(&self) -> CVector {
        let mut out = CVector::zeros(self.dim);
        for v in self.coefficients.values() {
            out += v;
        }
        out
    }

    /// Harmonic shift: the pair `(ε + lω, u')` with `u'^(k) = u^(k+l)`
    /// describes the same physical state as `(ε, u)`.
    pub fn harmonic_shifted(&self, l: i32) -> Self {
        let mut coefficients = BTreeMap::new();
        for (&k, v) in &self.coefficients {
            coefficients.insert(k - l, v.clone());
        }
        Self { coefficients, driving: self.driving, dim: self.dim }
    }

    /// Rescale to unit extended-space norm.
    pub fn normalized(&self) -> Result<Self, FloquetError> {
        let n = self.norm_sq().sqrt();
        if n == 0.0 || !n.is_finite() {
            return Err(FloquetError::NotNormalized { norm: n });
        }
        let mut out = self.clone();
        for v in out.coefficients.values_mut() {
            *v /= C64::from(n);
        }
        Ok(out)
    }

    /// Rotate the global phase so the largest-magnitude coefficient entry is
    /// real and positive. Makes solver outputs reproducible.
    pub fn phase_fixed(&self) -> Self {
        let mut best: Option<C64> = None;
        let mut best_norm = 0.0;
        for v in self.coefficients.values() {
            for z in v.iter() {
                let n = z.norm();
                if n > best_norm {
                    best_norm = n;
                    best = Some(*z);
                }
            }
        }
        let Some(z) = best else { return self.clone() };
        if best_norm == 0.0 {
            return self.clone();
        }
        let rot = z.conj() / C64::from(best_norm);
        let mut out = self.clone();
        for v in out.coefficients.values_mut() {
            *v *= rot;
        }
        out
    }

    /// Linear combination `Σ_a c_a u_a` of same-shape functions.
    pub fn mixed(functions: &[&Self], weights: &CVector) -> Result<Self, FloquetError> {
        assert_eq!(functions.len(), weights.len());
        let driving = functions[0].driving;
        let dim = functions[0].dim;
        let mut coefficients: BTreeMap<i32, CVector> = BTreeMap::new();
        for (f, c) in functions.iter().zip(weights.iter()) {
            for (&k, v) in &f.coefficients {
                coefficients
                    .entry(k)
                    .or_insert_with(|| CVector::zeros(dim))
                    .axpy(*c, v, C64::new(1.0, 0.0));
            }
        }
        Self::new(coefficients, driving)
    }
}

/// One element of the well-ordered eigenbasis: quasi-energy, average energy
/// and periodic eigenfunction, plus the resonance group it was resolved in.
#[derive(Debug, Clone, PartialEq)]
pub struct EigenTriplet {
    pub quasi_energy: f64,
    pub avg_energy: f64,
    pub function: FloquetFunction,
    pub resonance_group: Option<usize>,
    /// Set when the average energy tied with a neighbour inside the group and
    /// the order was decided by the spectral variance instead.
    pub degenerate: bool,
}

impl EigenTriplet {
    /// Build a triplet from a normalized function, folding the quasi-energy
    /// into `[-ω/2, ω/2)` and fixing the global phase.
    pub fn from_function(
        quasi_energy: f64,
        function: FloquetFunction,
        resonance_group: Option<usize>,
    ) -> Result<Self, FloquetError> {
        function.check_normalized()?;
        let omega = function.driving().omega();
        let (eps, l) = fold_quasi_energy(quasi_energy, omega);
        let function = if l == 0 { function } else { function.harmonic_shifted(-l) };
        let function = function.phase_fixed();
        let avg_energy = effective_average_energy(&function, eps)?;
        Ok(Self { quasi_energy: eps, avg_energy, function, resonance_group, degenerate: false })
    }

    /// Spectral variance `Σ_k (ε + kω)² ‖u^(k)‖² - ε̄²`.
    pub fn variance(&self) -> f64 {
        spectral_moment(&self.function, self.quasi_energy, 2)
            .expect("triplet function is normalized")
    }
}

/// Fold `ε'` to `ε = ε' - lω ∈ [-ω/2, ω/2)`; returns `(ε, l)`.
pub(crate) fn fold_quasi_energy(eps: f64, omega: f64) -> (f64, i32) {
    let mut l = (eps / omega + 0.5).floor() as i32;
    let mut folded = eps - l as f64 * omega;
    if folded >= omega / 2.0 {
        l += 1;
        folded -= omega;
    } else if folded < -omega / 2.0 {
        l -= 1;
        folded += omega;
    }
    (folded, l)
}

/// Effective average energy `ε̄ = ε + Σ_k kω ‖u^(k)‖²` of a normalized
/// Floquet function. Invariant under harmonic shifts of `(ε, u)` together.
pub fn effective_average_energy(
    u: &FloquetFunction,
    quasi_energy: f64,
) -> Result<f64, FloquetError> {
    u.check_normalized()?;
    let omega = u.driving().omega();
    let shift: f64 =
        u.coefficients().iter().map(|(&k, v)| k as f64 * omega * v.norm_squared()).sum();
    Ok(quasi_energy + shift)
}

/// Spectral moments of the line spectrum at `ε + kω` with weights `‖u^(k)‖²`:
/// order 1 is the average energy, order 2 the variance about it.
pub fn spectral_moment(
    u: &FloquetFunction,
    quasi_energy: f64,
    order: u32,
) -> Result<f64, FloquetError> {
    match order {
        1 => effective_average_energy(u, quasi_energy),
        2 => {
            let mean = effective_average_energy(u, quasi_energy)?;
            let omega = u.driving().omega();
            let second: f64 = u
                .coefficients()
                .iter()
                .map(|(&k, v)| {
                    let line = quasi_energy + k as f64 * omega;
                    line * line * v.norm_squared()
                })
                .sum();
            Ok((second - mean * mean).max(0.0))
        }
        order => Err(FloquetError::UnsupportedOrder { order }),
    }
}

/// A ξ-resonant set of folded eigenpairs with its average-energy matrix `M`.
#[derive(Debug, Clone)]
pub struct ResonantGroup {
    members: Vec<usize>,
    epsilon: f64,
    matrix: CMatrix,
    functions: Vec<FloquetFunction>,
}

impl ResonantGroup {
    /// Build a group from pair indices into `pairs`. Members are re-aligned
    /// by whole harmonic shifts so their quasi-energies cluster around a
    /// common representative (resonances across the zone boundary included),
    /// then orthonormalized in extended space. Members that turn out to be
    /// harmonic copies of an earlier member (orthogonal remainder below
    /// 1e-6) are dropped, which lets Ritz subspaces reuse this machinery.
    pub fn new(pairs: &[RawEigenpair], members: Vec<usize>) -> Result<Self, FloquetError> {
        assert!(!members.is_empty());
        let omega = pairs[members[0]].function.driving().omega();
        let eps_ref = pairs[members[0]].quasi_energy;
        let mut kept = Vec::with_capacity(members.len());
        let mut functions: Vec<FloquetFunction> = Vec::with_capacity(members.len());
        let mut eps_sum = 0.0;
        for &i in &members {
            let pair = &pairs[i];
            let l = ((pair.quasi_energy - eps_ref) / omega).round() as i32;
            let f = if l == 0 {
                pair.function.clone()
            } else {
                pair.function.harmonic_shifted(-l)
            };
            f.check_normalized()?;
            let mut g = f;
            for _ in 0..2 {
                for q in &functions {
                    let c = q.extended_dot(&g);
                    g = FloquetFunction::mixed(
                        &[&g, q],
                        &CVector::from_vec(alloc::vec![C64::new(1.0, 0.0), -c]),
                    )?;
                }
            }
            if g.norm_sq().sqrt() < 1e-6 {
                continue;
            }
            functions.push(g.normalized()?);
            eps_sum += pair.quasi_energy - l as f64 * omega;
            kept.push(i);
        }
        let epsilon = eps_sum / kept.len() as f64;
        let matrix = resonance_matrix(&functions);
        Ok(Self { members: kept, epsilon, matrix, functions })
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn epsilon(&self) -> f64 {
        self.epsilon
    }

    pub fn matrix(&self) -> &CMatrix {
        &self.matrix
    }

    pub fn functions(&self) -> &[FloquetFunction] {
        &self.functions
    }

    pub fn size(&self) -> usize {
        self.members.len()
    }
}

/// Partition deduplicated pairs into ξ-resonant groups (transitive closure of
/// `|mod_zone(ε_m - ε_n)| < ξ`) and non-resonant singleton indices.
pub fn resonance_groups(
    pairs: &[RawEigenpair],
    cfg: &ToleranceConfig,
) -> (Vec<Vec<usize>>, Vec<usize>) {
    let n = pairs.len();
    if n == 0 {
        return (Vec::new(), Vec::new());
    }
    let omega = pairs[0].function.driving().omega();
    let mut parent: Vec<usize> = (0..n).collect();
    fn find(parent: &mut Vec<usize>, i: usize) -> usize {
        let mut root = i;
        while parent[root] != root {
            root = parent[root];
        }
        let mut cur = i;
        while parent[cur] != root {
            let next = parent[cur];
            parent[cur] = root;
            cur = next;
        }
        root
    }
    for i in 0..n {
        for j in (i + 1)..n {
            let diff = mod_zone(pairs[i].quasi_energy - pairs[j].quasi_energy, omega);
            if diff.abs() < cfg.xi {
                let (ri, rj) = (find(&mut parent, i), find(&mut parent, j));
                if ri != rj {
                    parent[ri.max(rj)] = ri.min(rj);
                }
            }
        }
    }
    let mut buckets: BTreeMap<usize, Vec<usize>> = BTreeMap::new();
    for i in 0..n {
        let root = find(&mut parent, i);
        buckets.entry(root).or_default().push(i);
    }
    let mut groups = Vec::new();
    let mut singles = Vec::new();
    for (_, members) in buckets {
        if members.len() > 1 {
            groups.push(members);
        } else {
            singles.push(members[0]);
        }
    }
    (groups, singles)
}

/// Infinite-time average-energy matrix `M_ab = Σ_k kω ⟨u_a^(k)|u_b^(k)⟩` over
/// extended-space-orthonormal members of one resonant subspace.
pub fn resonance_matrix(functions: &[FloquetFunction]) -> CMatrix {
    let g = functions.len();
    let omega = if g > 0 { functions[0].driving().omega() } else { 0.0 };
    let mut m = CMatrix::zeros(g, g);
    for a in 0..g {
        for b in 0..g {
            let mut acc = C64::new(0.0, 0.0);
            for (&k, v) in functions[a].coefficients() {
                if let Some(w) = functions[b].coefficient(k) {
                    acc += v.dotc(w) * C64::from(k as f64 * omega);
                }
            }
            m[(a, b)] = acc;
        }
    }
    // symmetrize away float noise
    let adj = m.adjoint();
    (m + adj).scale(0.5)
}

/// Diagonalize a group's `M` matrix: returns one triplet per member with the
/// common quasi-energy, average energies ascending, and the corresponding
/// eigenvector mixtures as functions. Average-energy ties within
/// `degeneracy_tol` are ordered by spectral variance and flagged.
pub fn resolve_resonance(
    group: &ResonantGroup,
    cfg: &ToleranceConfig,
    group_id: Option<usize>,
) -> Result<Vec<EigenTriplet>, FloquetError> {
    let g = group.size();
    let eig = nalgebra::SymmetricEigen::try_new(group.matrix.clone(), f64::EPSILON, 0)
        .ok_or(FloquetError::EigensolveFailed)?;
    let mut order: Vec<usize> = (0..g).collect();
    order.sort_by(|&i, &j| eig.eigenvalues[i].total_cmp(&eig.eigenvalues[j]));

    let refs: Vec<&FloquetFunction> = group.functions.iter().collect();
    let mut triplets = Vec::with_capacity(g);
    for &col in &order {
        let weights = eig.eigenvectors.column(col).clone_owned();
        let function = FloquetFunction::mixed(&refs, &weights)?.normalized()?;
        let t = EigenTriplet::from_function(group.epsilon, function, group_id)?;
        debug_assert!((t.avg_energy - (group.epsilon + eig.eigenvalues[col])).abs() < 1e-9);
        triplets.push(t);
    }
    order_degenerate_by_variance(&mut triplets, cfg.degeneracy_tol);
    Ok(triplets)
}

/// Reorder runs of average-energy ties by ascending spectral variance and
/// flag their members.
fn order_degenerate_by_variance(triplets: &mut [EigenTriplet], tol: f64) {
    let n = triplets.len();
    let mut start = 0;
    while start < n {
        let mut end = start + 1;
        while end < n && (triplets[end].avg_energy - triplets[end - 1].avg_energy).abs() <= tol {
            end += 1;
        }
        if end - start > 1 {
            triplets[start..end].sort_by(|a, b| a.variance().total_cmp(&b.variance()));
            for t in &mut triplets[start..end] {
                t.degenerate = true;
            }
        }
        start = end;
    }
}

/// The ordered, resonance-resolved eigenbasis of a periodic Hamiltonian.
#[derive(Debug, Clone)]
pub struct Eigenspace {
    triplets: Vec<EigenTriplet>,
    config: ToleranceConfig,
    driving: DrivingSpec,
    hamiltonian: FourierHamiltonian,
}

impl Eigenspace {
    /// Triplets sorted by `(ε̄, variance)`, ground state first.
    pub fn triplets(&self) -> &[EigenTriplet] {
        &self.triplets
    }

    pub fn ground(&self) -> &EigenTriplet {
        &self.triplets[0]
    }

    pub fn len(&self) -> usize {
        self.triplets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.triplets.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.hamiltonian.dim()
    }

    pub fn config(&self) -> &ToleranceConfig {
        &self.config
    }

    pub fn driving(&self) -> DrivingSpec {
        self.driving
    }

    pub fn hamiltonian(&self) -> &FourierHamiltonian {
        &self.hamiltonian
    }

    /// Assemble directly from triplets; used by oracles and synthetic tests.
    /// The physical orthonormality of the members is still enforced.
    pub fn from_triplets(
        triplets: Vec<EigenTriplet>,
        config: ToleranceConfig,
        hamiltonian: FourierHamiltonian,
    ) -> Result<Self, FloquetError> {
        let driving = hamiltonian.driving();
        let es = Self { triplets, config, driving, hamiltonian };
        es.check_orthonormal()?;
        Ok(es)
    }

    /// Synthetic assembly without the orthonormality gate; test-only states
    /// (single cross terms, deliberately inconsistent bases) go through here.
    #[cfg(test)]
    pub(crate) fn from_triplets_unchecked(
        triplets: Vec<EigenTriplet>,
        config: ToleranceConfig,
        hamiltonian: FourierHamiltonian,
    ) -> Self {
        let driving = hamiltonian.driving();
        Self { triplets, config, driving, hamiltonian }
    }

    fn check_orthonormal(&self) -> Result<(), FloquetError> {
        let states: Vec<CVector> = self.triplets.iter().map(|t| t.function.at_zero()).collect();
        let mut worst = 0.0f64;
        for (i, a) in states.iter().enumerate() {
            for (j, b) in states.iter().enumerate() {
                let overlap = a.dotc(b);
                let target = if i == j { 1.0 } else { 0.0 };
                worst = worst.max((overlap - C64::from(target)).norm());
            }
        }
        if worst >= 1e-8 {
            return Err(FloquetError::OrthonormalityViolation { deviation: worst });
        }
        Ok(())
    }
}

/// Run the full pipeline: extended matrix, diagonalization, zone folding,
/// harmonic deduplication, ξ-resonant grouping, `M` resolution, and the final
/// `(ε̄, variance)` ordering.
pub fn build_eigenspace(
    h: &FourierHamiltonian,
    cfg: &ToleranceConfig,
) -> Result<Eigenspace, FloquetError> {
    cfg.validate()?;
    let omega = h.driving().omega();
    let matrix = build_extended(h, cfg)?;
    let raw = diagonalize_extended(&matrix)?;
    let folded = fold_to_zone(raw, omega);
    let survivors = deduplicate_harmonics(&folded, cfg, h.dim())?;
    let (groups, singles) = resonance_groups(&survivors, cfg);

    let mut triplets = Vec::with_capacity(h.dim());
    for i in singles {
        let pair = &survivors[i];
        triplets.push(EigenTriplet::from_function(
            pair.quasi_energy,
            pair.function.clone(),
            None,
        )?);
    }
    for (id, members) in groups.into_iter().enumerate() {
        let group = ResonantGroup::new(&survivors, members)?;
        triplets.extend(resolve_resonance(&group, cfg, Some(id))?);
    }
    triplets.sort_by(|a, b| {
        a.avg_energy
            .total_cmp(&b.avg_energy)
            .then_with(|| a.variance().total_cmp(&b.variance()))
    });
    Eigenspace::from_triplets(triplets, *cfg, h.clone())
}
