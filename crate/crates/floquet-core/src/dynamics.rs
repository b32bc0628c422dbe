//! Time evolution and observables built on an [`Eigenspace`]: propagators,
//! infinite- and finite-time energy spectra, the observed average energy and
//! its eigenbasis-decomposed form, interaction-picture divergence, and the
//! averaging-window boundaries `T_min`/`T_max`.

use alloc::string::String;
use alloc::vec::Vec;

// float intrinsics under no_std; shadowed by the inherent methods otherwise
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;

use crate::average::{EigenTriplet, Eigenspace, FloquetFunction};
use crate::extended::mod_zone;
use crate::model::{max_abs, FloquetError, FourierHamiltonian, StateVector};
use crate::{C64, CMatrix, CVector};

/// Default quadrature resolution: at most `T/64` between samples.
pub const STEPS_PER_PERIOD: usize = 64;

/// A delta line of the infinite-time energy spectrum.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SpectrumLine {
    pub energy: f64,
    pub weight: f64,
}

/// A sampled finite-time spectrum `P^T[Ψ(0), E]` on an energy grid.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectrumGrid {
    pub energies: Vec<f64>,
    pub values: Vec<f64>,
    pub averaging_time: f64,
}

/// Averaging-window boundaries and the matrix elements that limit them.
#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    /// Below this time the eigenstate cross terms have not averaged out.
    pub t_min: f64,
    /// Triplet pair and harmonic offset `(m, n, l)` that set `t_min`.
    pub t_min_indices: Option<(usize, usize, i32)>,
    /// Above this time the perturbation rotates the resonant pair visibly;
    /// infinite when no resonant pair couples through the perturbation.
    pub t_max: f64,
    /// Resonant pair `(a, b)` that sets `t_max`.
    pub t_max_pair: Option<(usize, usize)>,
    /// `t_max < t_min`: no valid averaging window exists.
    pub crossed: bool,
}

/// Per-sample interaction-picture deviation of one propagator from another.
#[derive(Debug, Clone, PartialEq)]
pub struct DivergenceReport {
    pub times: Vec<f64>,
    pub deviations: Vec<f64>,
    pub max: f64,
}

fn check_complete(es: &Eigenspace) -> Result<(), FloquetError> {
    if es.len() != es.dim() {
        return Err(FloquetError::IncompleteEigenspace { have: es.len(), need: es.dim() });
    }
    Ok(())
}

/// `U(t) = Σ_n e^{-iε_n t} |u_n(t)⟩⟨u_n(0)|`.
pub fn propagator_at(es: &Eigenspace, t: f64) -> Result<CMatrix, FloquetError> {
    check_complete(es)?;
    let d = es.dim();
    let mut u = CMatrix::zeros(d, d);
    for triplet in es.triplets() {
        let ut = triplet.function.at(t);
        let u0 = triplet.function.at_zero();
        let phase = C64::from_polar(1.0, -triplet.quasi_energy * t);
        u += (ut * u0.adjoint()) * phase;
    }
    Ok(u)
}

/// Eigenbasis projections `C_n = ⟨u_n(0)|Ψ(0)⟩`.
pub fn projections(es: &Eigenspace, psi0: &StateVector) -> Result<Vec<C64>, FloquetError> {
    check_complete(es)?;
    let norm = psi0.amplitudes().norm();
    if (norm - 1.0).abs() > 1e-10 {
        return Err(FloquetError::NotNormalized { norm });
    }
    Ok(es
        .triplets()
        .iter()
        .map(|t| t.function.at_zero().dotc(psi0.amplitudes()))
        .collect())
}

/// Precomputed expansion of one initial state over the eigenbasis, for
/// repeated time evaluation.
struct Evolution<'a> {
    es: &'a Eigenspace,
    coeffs: Vec<C64>,
}

impl<'a> Evolution<'a> {
    fn new(es: &'a Eigenspace, psi0: &StateVector) -> Result<Self, FloquetError> {
        Ok(Self { es, coeffs: projections(es, psi0)? })
    }

    fn state_at(&self, t: f64) -> CVector {
        let mut out = CVector::zeros(self.es.dim());
        for (c, triplet) in self.coeffs.iter().zip(self.es.triplets()) {
            let phase = C64::from_polar(1.0, -triplet.quasi_energy * t) * c;
            out += triplet.function.at(t) * phase;
        }
        out
    }
}

/// Evolve `Ψ(t) = Σ_n C_n e^{-iε_n t} |u_n(t)⟩`.
pub fn evolve(es: &Eigenspace, psi0: &StateVector, t: f64) -> Result<StateVector, FloquetError> {
    let ev = Evolution::new(es, psi0)?;
    Ok(StateVector::new(ev.state_at(t)))
}

/// Weight floor below which harmonics are left out of the line spectrum.
const LINE_WEIGHT_FLOOR: f64 = 1e-12;

/// The infinite-time spectrum of an eigenstate: lines at `ε + kω` with
/// weights `‖u^(k)‖²`, ascending in energy.
pub fn infinite_spectrum(triplet: &EigenTriplet) -> Result<Vec<SpectrumLine>, FloquetError> {
    triplet.function.check_normalized()?;
    let omega = triplet.function.driving().omega();
    let mut lines: Vec<SpectrumLine> = triplet
        .function
        .coefficients()
        .iter()
        .filter_map(|(&k, v)| {
            let weight = v.norm_squared();
            (weight > LINE_WEIGHT_FLOOR).then(|| SpectrumLine {
                energy: triplet.quasi_energy + k as f64 * omega,
                weight,
            })
        })
        .collect();
    lines.sort_by(|a, b| a.energy.total_cmp(&b.energy));
    Ok(lines)
}

/// Windowed transform `P^T[Ψ(0), E] = ‖(1/2π) ∫_{-T}^{T} e^{iEt} U(t)Ψ(0) dt‖²`
/// by trapezoidal quadrature with step at most `period/64`, sampled on `grid`.
pub fn finite_spectrum(
    es: &Eigenspace,
    psi0: &StateVector,
    script_t: f64,
    grid: &[f64],
) -> Result<SpectrumGrid, FloquetError> {
    if !(script_t > 0.0) {
        return Err(FloquetError::InvalidParameter(String::from(
            "averaging time must be positive",
        )));
    }
    if grid.is_empty() {
        return Err(FloquetError::InvalidParameter(String::from("energy grid is empty")));
    }
    let ev = Evolution::new(es, psi0)?;
    let period = es.driving().period();
    let steps = ((2.0 * script_t / (period / STEPS_PER_PERIOD as f64)).ceil() as usize).max(8);
    let dt = 2.0 * script_t / steps as f64;
    let states: Vec<CVector> =
        (0..=steps).map(|j| ev.state_at(-script_t + j as f64 * dt)).collect();
    let norm = dt / core::f64::consts::TAU;
    let values = grid
        .iter()
        .map(|&energy| {
            let mut acc = CVector::zeros(es.dim());
            for (j, state) in states.iter().enumerate() {
                let t = -script_t + j as f64 * dt;
                let mut w = C64::from_polar(norm, energy * t);
                if j == 0 || j == steps {
                    w *= C64::from(0.5);
                }
                acc.axpy(w, state, C64::new(1.0, 0.0));
            }
            acc.norm_squared()
        })
        .collect();
    Ok(SpectrumGrid { energies: grid.to_vec(), values, averaging_time: script_t })
}

/// Observed average energy `Ē^T[Ψ(0)] = (1/T)∫_0^T ⟨Ψ(t)|H(t)|Ψ(t)⟩ dt` by
/// trapezoidal quadrature with step at most `period/64`. Time evolution is
/// exact in the eigenbasis; only the expectation integral is discretized.
pub fn observed_average_energy(
    es: &Eigenspace,
    psi0: &StateVector,
    script_t: f64,
) -> Result<f64, FloquetError> {
    if !(script_t > 0.0) {
        return Err(FloquetError::InvalidParameter(String::from(
            "averaging time must be positive",
        )));
    }
    let ev = Evolution::new(es, psi0)?;
    let h = es.hamiltonian();
    let period = es.driving().period();
    let steps = ((script_t / (period / STEPS_PER_PERIOD as f64)).ceil() as usize).max(8);
    let dt = script_t / steps as f64;
    let mut acc = 0.0;
    for j in 0..=steps {
        let t = j as f64 * dt;
        let state = ev.state_at(t);
        let value = state.dotc(&(h.at(t) * &state)).re;
        acc += if j == 0 || j == steps { 0.5 * value } else { value };
    }
    Ok(acc / steps as f64)
}

/// `(1/T)∫_0^T e^{-iwt} dt`.
fn window_integral(w: f64, script_t: f64) -> C64 {
    let x = w * script_t;
    if x.abs() < 1e-8 {
        // series of (1 - e^{-ix})/(ix)
        C64::new(1.0 - x * x / 6.0, -x / 2.0)
    } else {
        (C64::from(1.0) - C64::from_polar(1.0, -x)) / C64::new(0.0, x)
    }
}

/// Overlap sums `A = Σ_k ⟨u_m^(k-l)|u_n^(k)⟩` and
/// `B = Σ_k kω ⟨u_m^(k-l)|u_n^(k)⟩`.
fn harmonic_couplings(
    m: &FloquetFunction,
    n: &FloquetFunction,
    l: i32,
    omega: f64,
) -> (C64, C64) {
    let mut a = C64::new(0.0, 0.0);
    let mut b = C64::new(0.0, 0.0);
    for (&k, w) in n.coefficients() {
        if let Some(v) = m.coefficient(k - l) {
            let d = v.dotc(w);
            a += d;
            b += d * C64::from(k as f64 * omega);
        }
    }
    (a, b)
}

/// The eigenbasis-decomposed observed average energy: diagonal eigenstate
/// averages plus oscillatory cross terms with analytic window integrals of
/// `e^{-i(ε_n - ε_m + lω)t}`. Agrees with [`observed_average_energy`] without
/// any time quadrature.
pub fn decomposed_average_energy(
    es: &Eigenspace,
    psi0: &StateVector,
    script_t: f64,
) -> Result<f64, FloquetError> {
    if !(script_t > 0.0) {
        return Err(FloquetError::InvalidParameter(String::from(
            "averaging time must be positive",
        )));
    }
    let coeffs = projections(es, psi0)?;
    let omega = es.driving().omega();
    let triplets = es.triplets();
    let mut key_min = i32::MAX;
    let mut key_max = i32::MIN;
    for t in triplets {
        for &k in t.function.coefficients().keys() {
            key_min = key_min.min(k);
            key_max = key_max.max(k);
        }
    }
    let span = key_max - key_min;
    let mut total = C64::new(0.0, 0.0);
    for (m, tm) in triplets.iter().enumerate() {
        for (n, tn) in triplets.iter().enumerate() {
            let weight = coeffs[m].conj() * coeffs[n];
            if weight.norm() < 1e-300 {
                continue;
            }
            for l in -span..=span {
                let (a, b) = harmonic_couplings(&tm.function, &tn.function, l, omega);
                let amp = a * C64::from(tn.quasi_energy) + b;
                if amp.norm() < 1e-300 {
                    continue;
                }
                let w_mnl = tn.quasi_energy - tm.quasi_energy + l as f64 * omega;
                total += weight * amp * window_integral(w_mnl, script_t);
            }
        }
    }
    Ok(total.re)
}

/// Max-abs-entry deviation of `U_ref(t)^dag U_model(t)` from the identity at
/// each sample, the elementwise interaction-picture divergence.
pub fn interaction_divergence(
    es_model: &Eigenspace,
    es_ref: &Eigenspace,
    t_samples: &[f64],
) -> Result<DivergenceReport, FloquetError> {
    if es_model.dim() != es_ref.dim() {
        return Err(FloquetError::InvalidParameter(String::from(
            "propagators act on different Hilbert spaces",
        )));
    }
    if (es_model.driving().omega() - es_ref.driving().omega()).abs()
        > 1e-12 * es_ref.driving().omega()
    {
        return Err(FloquetError::InvalidParameter(String::from(
            "propagators have different driving frequencies",
        )));
    }
    let id = CMatrix::identity(es_ref.dim(), es_ref.dim());
    let mut deviations = Vec::with_capacity(t_samples.len());
    let mut max = 0.0f64;
    for &t in t_samples {
        let u_model = propagator_at(es_model, t)?;
        let u_ref = propagator_at(es_ref, t)?;
        let dev = max_abs(&(u_ref.adjoint() * u_model - &id));
        max = max.max(dev);
        deviations.push(dev);
    }
    Ok(DivergenceReport { times: t_samples.to_vec(), deviations, max })
}

/// Lower averaging boundary
/// `T_min = max_{m != n, l} |2 Σ_k kω⟨u_m^(k)|u_n^(k+l)⟩ / (ξ ω_mnl)|`
/// over non-resonant `(m, n, l)` (`|ω_mnl| >= ξ`), floored at one period.
pub fn boundary_t_min(es: &Eigenspace, xi: f64) -> (f64, Option<(usize, usize, i32)>) {
    let omega = es.driving().omega();
    let triplets = es.triplets();
    let mut key_min = i32::MAX;
    let mut key_max = i32::MIN;
    for t in triplets {
        for &k in t.function.coefficients().keys() {
            key_min = key_min.min(k);
            key_max = key_max.max(k);
        }
    }
    let span = if triplets.is_empty() { 0 } else { key_max - key_min };
    let mut best = 0.0f64;
    let mut best_idx = None;
    for (m, tm) in triplets.iter().enumerate() {
        for (n, tn) in triplets.iter().enumerate() {
            if m == n {
                continue;
            }
            for l in -span..=span {
                let w_mnl = tn.quasi_energy - tm.quasi_energy + l as f64 * omega;
                if w_mnl.abs() < xi {
                    continue; // resonant: resolved by the M diagonalization
                }
                let mut s = C64::new(0.0, 0.0);
                for (&k, v) in tm.function.coefficients() {
                    if let Some(w) = tn.function.coefficient(k + l) {
                        s += v.dotc(w) * C64::from(k as f64 * omega);
                    }
                }
                let value = (2.0 * s.norm() / (xi * w_mnl)).abs();
                if value > best {
                    best = value;
                    best_idx = Some((m, n, l));
                }
            }
        }
    }
    (best.max(es.driving().period()), best_idx)
}

/// Upper averaging boundary `T_max = min_{a != b} |ξ / ((ε̄_a - ε̄_b) v_ab)|`
/// over ξ-resonant pairs, where `v_ab = Σ_k ⟨u_a^(k)|v^(0)|u_b^(k)⟩` is the
/// static Fourier component of the perturbation between the pair. Infinite
/// when no resonant pair couples.
pub fn boundary_t_max(
    es: &Eigenspace,
    perturbation: &FourierHamiltonian,
    xi: f64,
) -> Result<(f64, Option<(usize, usize)>), FloquetError> {
    if perturbation.dim() != es.dim() {
        return Err(FloquetError::InvalidParameter(String::from(
            "perturbation dimension does not match the eigenspace",
        )));
    }
    let omega = es.driving().omega();
    let triplets = es.triplets();
    let mut best = f64::INFINITY;
    let mut best_pair = None;
    let Some(v0) = perturbation.component(0) else {
        return Ok((best, best_pair));
    };
    for (a, ta) in triplets.iter().enumerate() {
        for (b, tb) in triplets.iter().enumerate().skip(a + 1) {
            if mod_zone(ta.quasi_energy - tb.quasi_energy, omega).abs() >= xi {
                continue;
            }
            let mut v_ab = C64::new(0.0, 0.0);
            for (&k, u_a) in ta.function.coefficients() {
                if let Some(u_b) = tb.function.coefficient(k) {
                    v_ab += u_a.dotc(&(v0 * u_b));
                }
            }
            let denom = (ta.avg_energy - tb.avg_energy).abs() * v_ab.norm();
            if denom == 0.0 {
                continue;
            }
            let value = xi / denom;
            if value < best {
                best = value;
                best_pair = Some((a, b));
            }
        }
    }
    Ok((best, best_pair))
}

/// Both boundaries plus the crossing flag `t_max < t_min`.
pub fn boundary_report(
    es: &Eigenspace,
    perturbation: &FourierHamiltonian,
    xi: f64,
) -> Result<BoundaryReport, FloquetError> {
    let (t_min, t_min_indices) = boundary_t_min(es, xi);
    let (t_max, t_max_pair) = boundary_t_max(es, perturbation, xi)?;
    Ok(BoundaryReport { t_min, t_min_indices, t_max, t_max_pair, crossed: t_max < t_min })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::average::Eigenspace;
    use crate::model::{DrivingSpec, ToleranceConfig};
    use crate::twolevel::TwoLevelParams;
    use alloc::collections::BTreeMap;
    use alloc::vec;

    const SQRT_2: f64 = core::f64::consts::SQRT_2;

    fn params(v_drive: f64, v_static: f64) -> TwoLevelParams {
        TwoLevelParams { omega0: 1.0, omega: 1.5, v_drive, v_static }
    }

    fn oracle_eigenspace(v_drive: f64) -> Eigenspace {
        let p = params(v_drive, 0.0);
        let [plus, minus] = p.analytic_triplets().unwrap();
        let mut triplets = vec![plus, minus];
        triplets.sort_by(|a, b| a.avg_energy.total_cmp(&b.avg_energy));
        Eigenspace::from_triplets(
            triplets,
            ToleranceConfig::default(),
            p.fourier_hamiltonian().unwrap(),
        )
        .unwrap()
    }

    fn perturbed_eigenspace(v_static: f64) -> Eigenspace {
        let p = params(SQRT_2, v_static);
        let [plus, minus] = p.perturbed_triplets().unwrap();
        let mut triplets = vec![plus, minus];
        triplets.sort_by(|a, b| a.avg_energy.total_cmp(&b.avg_energy));
        Eigenspace::from_triplets(
            triplets,
            ToleranceConfig::default(),
            p.fourier_hamiltonian().unwrap(),
        )
        .unwrap()
    }

    fn basis_state(i: usize) -> StateVector {
        let mut v = CVector::zeros(2);
        v[i] = C64::from(1.0);
        StateVector::normalized(v).unwrap()
    }

    #[test]
    fn propagator_identity_and_unitarity() {
        let es = oracle_eigenspace(1.0);
        let id = CMatrix::identity(2, 2);
        assert!(max_abs(&(propagator_at(&es, 0.0).unwrap() - &id)) < 1e-12);
        let period = es.driving().period();
        for t in [0.37, 11.0, 1000.0 * period] {
            let u = propagator_at(&es, t).unwrap();
            assert!(max_abs(&(u.adjoint() * &u - &id)) < 1e-8, "t={t}");
        }
    }

    #[test]
    fn propagator_matches_oracle_and_composes_stroboscopically() {
        let es = oracle_eigenspace(SQRT_2);
        let p = params(SQRT_2, 0.0);
        let period = es.driving().period();
        for t in [0.5, period, 2.3 * period] {
            let diff = propagator_at(&es, t).unwrap() - p.analytic_propagator(t).unwrap();
            assert!(max_abs(&diff) < 1e-10, "t={t}");
        }
        let u1 = propagator_at(&es, period).unwrap();
        let u2 = propagator_at(&es, 2.0 * period).unwrap();
        assert!(max_abs(&(&u1 * &u1 - u2)) < 1e-8);
        let mut power = CMatrix::identity(2, 2);
        for n in 1..=100usize {
            power = &u1 * power;
            let direct = propagator_at(&es, n as f64 * period).unwrap();
            assert!(max_abs(&(&power - direct)) < n as f64 * 1e-9, "n={n}");
        }
    }

    #[test]
    fn eigenstate_evolution_keeps_population() {
        let es = oracle_eigenspace(1.0);
        let t0 = &es.triplets()[0];
        let psi0 = StateVector::normalized(t0.function.at_zero()).unwrap();
        for t in [0.7, 13.0] {
            let psi_t = evolve(&es, &psi0, t).unwrap();
            let expect = t0.function.at(t) * C64::from_polar(1.0, -t0.quasi_energy * t);
            assert!((psi_t.amplitudes() - &expect).norm() < 1e-10);
            let pop = psi_t.amplitudes().dotc(&expect).norm();
            assert!((pop - 1.0).abs() < 1e-10);
        }
    }

    #[test]
    fn rabi_oscillation_against_analytic_propagator() {
        let es = oracle_eigenspace(SQRT_2);
        let p = params(SQRT_2, 0.0);
        let psi0 = basis_state(1);
        for j in 0..20 {
            let t = j as f64 * 0.37;
            let evolved = evolve(&es, &psi0, t).unwrap();
            let oracle = p.analytic_propagator(t).unwrap() * psi0.amplitudes();
            assert!((evolved.amplitudes() - oracle).norm() < 1e-10, "t={t}");
        }
        // population of the driven level returns at the Rabi period 2 pi / Omega
        let rabi_period = core::f64::consts::TAU / p.rabi();
        let back = evolve(&es, &psi0, rabi_period).unwrap();
        let pop = back.amplitudes()[1].norm_sqr();
        assert!((pop - 1.0).abs() < 1e-10);
    }

    #[test]
    fn perturbed_evolution_matches_exact_propagator() {
        let es = perturbed_eigenspace(1e-3);
        let p = params(SQRT_2, 1e-3);
        let psi0 = basis_state(0);
        for t in [1.0, 100.0, 1000.0] {
            let evolved = evolve(&es, &psi0, t).unwrap();
            let oracle = p.analytic_propagator(t).unwrap() * psi0.amplitudes();
            assert!((evolved.amplitudes() - oracle).norm() < 1e-6, "t={t}");
        }
    }

    #[test]
    fn infinite_spectrum_lines_at_resonance() {
        let es = oracle_eigenspace(SQRT_2);
        let lines = infinite_spectrum(&es.triplets()[0]).unwrap();
        assert_eq!(lines.len(), 2);
        assert!((lines[0].energy + 1.5).abs() < 1e-12);
        assert!((lines[0].weight - 1.0 / 3.0).abs() < 1e-12);
        assert!(lines[1].energy.abs() < 1e-12);
        assert!((lines[1].weight - 2.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn infinite_spectrum_moments_off_resonance() {
        let es = oracle_eigenspace(1.0);
        for triplet in es.triplets() {
            let lines = infinite_spectrum(triplet).unwrap();
            let total: f64 = lines.iter().map(|l| l.weight).sum();
            let mean: f64 = lines.iter().map(|l| l.energy * l.weight).sum();
            assert!((total - 1.0).abs() < 1e-8);
            assert!((mean - triplet.avg_energy).abs() < 1e-8);
        }
        // ground state: lines (0.1909830, 0.7236068) and (-1.3090170, 0.2763932)
        let lines = infinite_spectrum(&es.triplets()[0]).unwrap();
        assert!((lines[0].energy + 1.309_016_994_374_947).abs() < 1e-9);
        assert!((lines[0].weight - 0.276_393_202_250_021).abs() < 1e-9);
        assert!((lines[1].energy - 0.190_983_005_625_053).abs() < 1e-9);
        assert!((lines[1].weight - 0.723_606_797_749_979).abs() < 1e-9);
    }

    #[test]
    fn infinite_spectrum_of_pure_static_state() {
        let driving = DrivingSpec::new(1.5).unwrap();
        let mut coeffs = BTreeMap::new();
        coeffs.insert(0, CVector::from_vec(vec![C64::from(1.0), C64::from(0.0)]));
        let f = FloquetFunction::new(coeffs, driving).unwrap();
        let t = EigenTriplet::from_function(0.25, f, None).unwrap();
        let lines = infinite_spectrum(&t).unwrap();
        assert_eq!(lines.len(), 1);
        assert_eq!(lines[0].energy, 0.25);
        assert!((lines[0].weight - 1.0).abs() < 1e-12);
    }

    #[test]
    fn finite_spectrum_peaks_converge_to_lines() {
        let es = oracle_eigenspace(1.0);
        let ground = &es.triplets()[0];
        let psi0 = StateVector::normalized(ground.function.at_zero()).unwrap();
        let period = es.driving().period();
        let script_t = 200.0 * period;
        let grid: Vec<f64> = (0..1600).map(|i| -2.0 + i as f64 * 0.0025).collect();
        let spec = finite_spectrum(&es, &psi0, script_t, &grid).unwrap();
        let lines = infinite_spectrum(ground).unwrap();
        for line in lines {
            // nearest local maximum of the sampled spectrum within one step
            let nearest = grid
                .iter()
                .enumerate()
                .min_by(|(_, a), (_, b)| {
                    (*a - line.energy).abs().total_cmp(&(*b - line.energy).abs())
                })
                .unwrap()
                .0;
            let peak = (nearest.saturating_sub(2)..(nearest + 3).min(grid.len()))
                .max_by(|&i, &j| spec.values[i].total_cmp(&spec.values[j]))
                .unwrap();
            assert!(
                (grid[peak] - line.energy).abs() <= 0.0025 + 1e-12,
                "peak at {} for line {}",
                grid[peak],
                line.energy
            );
        }
    }

    #[test]
    fn short_window_spectrum_is_uncertainty_broadened() {
        let es = oracle_eigenspace(1.0);
        let ground = &es.triplets()[0];
        let psi0 = StateVector::normalized(ground.function.at_zero()).unwrap();
        let script_t = es.driving().period() / 10.0;
        let grid: Vec<f64> = (0..4000).map(|i| -40.0 + i as f64 * 0.02).collect();
        let spec = finite_spectrum(&es, &psi0, script_t, &grid).unwrap();
        let peak = (0..grid.len())
            .max_by(|&i, &j| spec.values[i].total_cmp(&spec.values[j]))
            .unwrap();
        let half = spec.values[peak] / 2.0;
        let mut lo = peak;
        while lo > 0 && spec.values[lo] > half {
            lo -= 1;
        }
        let mut hi = peak;
        while hi + 1 < grid.len() && spec.values[hi] > half {
            hi += 1;
        }
        let fwhm = grid[hi] - grid[lo];
        assert!(fwhm >= 0.5 / script_t, "fwhm {fwhm}");
        assert!(fwhm <= 10.0 / script_t, "fwhm {fwhm}");
    }

    #[test]
    fn observed_average_of_eigenstate_is_avg_energy() {
        let es = oracle_eigenspace(1.0);
        let period = es.driving().period();
        for triplet in es.triplets() {
            let psi0 = StateVector::normalized(triplet.function.at_zero()).unwrap();
            let value = observed_average_energy(&es, &psi0, 50.0 * period).unwrap();
            assert!((value - triplet.avg_energy).abs() < 1e-6, "{value}");
        }
    }

    #[test]
    fn decomposed_matches_quadrature() {
        let es = oracle_eigenspace(1.0);
        let period = es.driving().period();
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let mix = StateVector::normalized(
            es.triplets()[0].function.at_zero() * C64::from(s)
                + es.triplets()[1].function.at_zero() * C64::from(s),
        )
        .unwrap();
        for script_t in [10.0 * period, 100.0 * period, 333.3] {
            let quad = observed_average_energy(&es, &mix, script_t).unwrap();
            let deco = decomposed_average_energy(&es, &mix, script_t).unwrap();
            assert!((quad - deco).abs() < 1e-6, "T={script_t}: {quad} vs {deco}");
        }
    }

    #[test]
    fn decomposed_single_component_is_diagonal() {
        let es = oracle_eigenspace(1.0);
        let t0 = &es.triplets()[0];
        let psi0 = StateVector::normalized(t0.function.at_zero()).unwrap();
        let period = es.driving().period();
        let value = decomposed_average_energy(&es, &psi0, 40.0 * period).unwrap();
        assert!((value - t0.avg_energy).abs() < 1e-10);
    }

    #[test]
    fn equal_mix_relaxes_to_mean_average_energy() {
        let es = oracle_eigenspace(1.0);
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let mix = StateVector::normalized(
            es.triplets()[0].function.at_zero() * C64::from(s)
                + es.triplets()[1].function.at_zero() * C64::from(s),
        )
        .unwrap();
        let value = decomposed_average_energy(&es, &mix, 1e3).unwrap();
        // averages are -+0.2236068, so the mix tends to 0
        assert!(value.abs() < 1e-3, "{value}");
    }

    #[test]
    fn divergence_of_identical_spaces_is_zero() {
        let es = oracle_eigenspace(1.0);
        let report = interaction_divergence(&es, &es, &[0.0, 1.0, 10.0]).unwrap();
        assert!(report.max < 1e-10);
    }

    #[test]
    fn divergence_grows_linearly_under_perturbation() {
        let es0 = oracle_eigenspace(SQRT_2);
        let es1 = perturbed_eigenspace(1e-3);
        let slope = 1e-3 * 2.0 / 3.0;
        let times: Vec<f64> = (1..=15).map(|i| i as f64).collect();
        let report = interaction_divergence(&es1, &es0, &times).unwrap();
        for (t, dev) in report.times.iter().zip(&report.deviations) {
            let expect = (slope * t).sin().abs();
            assert!((dev - expect).abs() < 1e-4, "t={t}: {dev} vs {expect}");
        }
        assert!((report.max - 1e-2).abs() < 1e-3, "max {}", report.max);
    }

    #[test]
    fn t_min_at_resonance_matches_reduced_form() {
        let es = oracle_eigenspace(SQRT_2);
        let xi = 1e-2;
        let (t_min, idx) = boundary_t_min(&es, xi);
        let expect = SQRT_2 / (1.5 * xi);
        assert!((t_min - expect).abs() < 0.05 * expect, "{t_min} vs {expect}");
        assert!(idx.is_some());
    }

    #[test]
    fn t_min_static_floors_to_one_period() {
        let mut comps = BTreeMap::new();
        comps.insert(
            0,
            CMatrix::from_diagonal(&CVector::from_vec(vec![C64::from(-1.0), C64::from(1.0)])),
        );
        let h =
            FourierHamiltonian::new(2, comps, DrivingSpec::new(1.5).unwrap()).unwrap();
        let es = crate::average::build_eigenspace(
            &h,
            &ToleranceConfig::default().with_xi(1e-2).with_cutoff(2),
        )
        .unwrap();
        let (t_min, _) = boundary_t_min(&es, 1e-2);
        assert_eq!(t_min, es.driving().period());
    }

    #[test]
    fn t_min_synthetic_cross_term() {
        // one cross term of size c = omega * beta at |omega_mnl| = delta
        let driving = DrivingSpec::new(1.5).unwrap();
        let beta = 0.3f64;
        let gamma = (1.0 - beta * beta).sqrt();
        let mut cm = BTreeMap::new();
        cm.insert(1, CVector::from_vec(vec![C64::from(1.0), C64::from(0.0)]));
        let um = FloquetFunction::new(cm, driving).unwrap();
        let mut cn = BTreeMap::new();
        cn.insert(0, CVector::from_vec(vec![C64::from(0.0), C64::from(gamma)]));
        cn.insert(-1, CVector::from_vec(vec![C64::from(beta), C64::from(0.0)]));
        let un = FloquetFunction::new(cn, driving).unwrap();
        let tm = EigenTriplet::from_function(0.1, um, None).unwrap();
        let tn = EigenTriplet::from_function(0.3, un, None).unwrap();
        let h = params(0.0, 0.0).fourier_hamiltonian().unwrap();
        let es = Eigenspace::from_triplets_unchecked(
            vec![tm, tn],
            ToleranceConfig::default(),
            h,
        );
        let xi = 1e-2;
        let (t_min, idx) = boundary_t_min(&es, xi);
        let c = 1.5 * beta;
        let delta = (0.3 - 0.1 - 2.0 * 1.5).abs();
        let expect = 2.0 * c / (xi * delta);
        assert!((t_min - expect).abs() < 1e-9 * expect, "{t_min} vs {expect}");
        assert_eq!(idx, Some((0, 1, -2)));
    }

    #[test]
    fn t_max_reduced_form_and_infinite_limit() {
        let es = oracle_eigenspace(SQRT_2);
        let xi = 1e-2;
        for v in [1e-3, 1e-5] {
            let pert = perturbation_matrix(v);
            let (t_max, pair) = boundary_t_max(&es, &pert, xi).unwrap();
            let expect = 2.0 * 1.5 * xi / (2.0 * v);
            assert!((t_max - expect).abs() < 0.05 * expect, "v={v}: {t_max} vs {expect}");
            assert_eq!(pair, Some((0, 1)));
        }
        let zero = params(SQRT_2, 0.0).fourier_hamiltonian().unwrap();
        let (t_max, pair) = boundary_t_max(&es, &zero, xi).unwrap();
        assert!(t_max.is_infinite());
        assert!(pair.is_none());
    }

    fn perturbation_matrix(v: f64) -> FourierHamiltonian {
        let mut comps = BTreeMap::new();
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 1)] = C64::from(v);
        m[(1, 0)] = C64::from(v);
        comps.insert(0, m);
        FourierHamiltonian::new(2, comps, DrivingSpec::new(1.5).unwrap()).unwrap()
    }

    #[test]
    fn crossing_predicate_follows_xi_threshold() {
        let es = oracle_eigenspace(SQRT_2);
        let xi = 1e-2;
        // omega sqrt(v / omega) vs xi on either side
        let crossed = boundary_report(&es, &perturbation_matrix(1e-3), xi).unwrap();
        assert!(crossed.crossed, "{:?}", crossed);
        let open = boundary_report(&es, &perturbation_matrix(1e-5), xi).unwrap();
        assert!(!open.crossed, "{:?}", open);
        assert!((open.t_min - 94.28).abs() < 0.05 * 94.28);
        assert!((open.t_max - 1500.0).abs() < 0.05 * 1500.0);
    }

    #[test]
    fn window_behavior_of_observed_average() {
        // perturbed model, unperturbed landscape inside the window
        let es = {
            let p = params(SQRT_2, 1e-5);
            let h = p.fourier_hamiltonian().unwrap();
            crate::average::build_eigenspace(
                &h,
                &ToleranceConfig::default().with_xi(1e-2).with_cutoff(8),
            )
            .unwrap()
        };
        let p = params(SQRT_2, 0.0);
        let xi = 1e-2;
        for j in 0..64 {
            let theta = j as f64 * core::f64::consts::PI / 64.0;
            let psi0 = p.theta_state(theta).unwrap();
            let expect = -0.5 * (2.0 * theta).cos();
            for script_t in [150.0, 300.0, 600.0] {
                let value = observed_average_energy(&es, &psi0, script_t).unwrap();
                assert!(
                    (value - expect).abs() < xi,
                    "theta={theta}, T={script_t}: {value} vs {expect}"
                );
            }
        }
    }
}
