//! Closed-form oracle for the two-level system driven by a circularly
//! polarized interaction, plus its statically perturbed variant at the first
//! resonance (leading order in the perturbation). Used by tests and the CLI
//! built-in model `twolevel`.

use alloc::collections::BTreeMap;
use alloc::string::String;

// float intrinsics under no_std; shadowed by the inherent methods otherwise
#[cfg_attr(feature = "std", allow(unused_imports))]
use num_traits::Float;

use crate::average::{EigenTriplet, FloquetFunction};
use crate::model::{DrivingSpec, FloquetError, FourierHamiltonian, StateVector};
use crate::{C64, CMatrix, CVector};

/// Tolerance on `|Ω - ω|` for operations restricted to the first resonance.
const RESONANCE_TOL: f64 = 1e-6;

/// `H(t) = [[ω0/2, v + (V/2)e^{-iωt}], [v + (V/2)e^{+iωt}, -ω0/2]]`.
///
/// Derived quantities (detuning, Rabi frequency) are recomputed on demand.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TwoLevelParams {
    /// Level splitting ω0.
    pub omega0: f64,
    /// Driving frequency ω.
    pub omega: f64,
    /// Driving strength V.
    pub v_drive: f64,
    /// Static perturbation v.
    pub v_static: f64,
}

impl TwoLevelParams {
    /// Detuning `δ = ω - ω0`.
    pub fn delta(&self) -> f64 {
        self.omega - self.omega0
    }

    /// Rabi frequency `Ω = sqrt(V² + δ²)`.
    pub fn rabi(&self) -> f64 {
        self.v_drive.hypot(self.delta())
    }

    /// Driving strength of the first resonance, `V1` such that `Ω = ω`.
    pub fn first_resonance_drive(&self) -> f64 {
        (self.omega * self.omega - self.delta() * self.delta()).sqrt()
    }

    pub fn driving(&self) -> Result<DrivingSpec, FloquetError> {
        DrivingSpec::new(self.omega)
    }

    fn check(&self) -> Result<(), FloquetError> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(FloquetError::InvalidParameter(String::from("omega must be positive")));
        }
        if self.v_drive < 0.0 || !self.v_drive.is_finite() {
            return Err(FloquetError::InvalidParameter(String::from(
                "driving strength must be nonnegative",
            )));
        }
        Ok(())
    }

    fn check_resonance(&self) -> Result<(), FloquetError> {
        let rabi = self.rabi();
        if (rabi - self.omega).abs() > RESONANCE_TOL {
            return Err(FloquetError::OffResonance { rabi, omega: self.omega });
        }
        Ok(())
    }

    /// Fourier components: `H^(0)` carries the splitting and the static
    /// perturbation, `H^(±1)` the circular drive.
    pub fn fourier_hamiltonian(&self) -> Result<FourierHamiltonian, FloquetError> {
        self.check()?;
        let mut comps = BTreeMap::new();
        let mut h0 = CMatrix::zeros(2, 2);
        h0[(0, 0)] = C64::from(self.omega0 / 2.0);
        h0[(1, 1)] = C64::from(-self.omega0 / 2.0);
        h0[(0, 1)] = C64::from(self.v_static);
        h0[(1, 0)] = C64::from(self.v_static);
        comps.insert(0, h0);
        if self.v_drive != 0.0 {
            let mut h1 = CMatrix::zeros(2, 2);
            h1[(0, 1)] = C64::from(self.v_drive / 2.0);
            let h1_dag = h1.adjoint();
            comps.insert(1, h1);
            comps.insert(-1, h1_dag);
        }
        FourierHamiltonian::new(2, comps, self.driving()?)
    }

    /// Amplitudes of the adiabatically connected eigenfunctions:
    /// `a = sqrt((Ω+δ)/2Ω)`, `c = sqrt((Ω-δ)/2Ω)`.
    fn amplitudes(&self) -> Result<(f64, f64), FloquetError> {
        let rabi = self.rabi();
        if rabi == 0.0 {
            return Err(FloquetError::InvalidParameter(String::from(
                "undriven degenerate point V = 0, delta = 0 has no adiabatic branch",
            )));
        }
        let a = ((rabi + self.delta()) / (2.0 * rabi)).sqrt();
        let c = ((rabi - self.delta()) / (2.0 * rabi)).sqrt();
        Ok((a, c))
    }

    /// Transformation matrix `U0(t)` whose columns are the unperturbed
    /// Floquet eigenfunctions `u⁰_±(t)`.
    fn frame(&self, t: f64) -> Result<CMatrix, FloquetError> {
        let (a, c) = self.amplitudes()?;
        let phase = C64::from_polar(1.0, -self.omega * t);
        let mut m = CMatrix::zeros(2, 2);
        m[(0, 0)] = C64::from(a);
        m[(0, 1)] = C64::from(c) * phase;
        m[(1, 0)] = -C64::from(c) * phase.conj();
        m[(1, 1)] = C64::from(a);
        Ok(m)
    }

    fn plus_function(&self) -> Result<FloquetFunction, FloquetError> {
        let (a, c) = self.amplitudes()?;
        let mut coeffs = BTreeMap::new();
        coeffs.insert(0, CVector::from_vec(alloc::vec![C64::from(a), C64::from(0.0)]));
        coeffs.insert(-1, CVector::from_vec(alloc::vec![C64::from(0.0), C64::from(-c)]));
        FloquetFunction::new(coeffs, self.driving()?)
    }

    fn minus_function(&self) -> Result<FloquetFunction, FloquetError> {
        let (a, c) = self.amplitudes()?;
        let mut coeffs = BTreeMap::new();
        coeffs.insert(1, CVector::from_vec(alloc::vec![C64::from(c), C64::from(0.0)]));
        coeffs.insert(0, CVector::from_vec(alloc::vec![C64::from(0.0), C64::from(a)]));
        FloquetFunction::new(coeffs, self.driving()?)
    }

    /// Exact eigentriplets of the unperturbed model (`v_static = 0`):
    /// `ε_± = ∓(Ω-ω)/2` and `ε̄_± = ∓(Ω - δω/Ω)/2`, returned in `(+, -)`
    /// branch order.
    pub fn analytic_triplets(&self) -> Result<[EigenTriplet; 2], FloquetError> {
        self.check()?;
        if self.v_static != 0.0 {
            return Err(FloquetError::InvalidParameter(String::from(
                "analytic triplets describe the unperturbed model; use perturbed_triplets",
            )));
        }
        let eps_plus = -(self.rabi() - self.omega) / 2.0;
        let plus = EigenTriplet::from_function(eps_plus, self.plus_function()?, None)?;
        let minus = EigenTriplet::from_function(-eps_plus, self.minus_function()?, None)?;
        Ok([plus, minus])
    }

    /// Leading-order eigentriplets of the statically perturbed model at the
    /// first resonance: `ε_± = ±v(2ω-ω0)/2ω`, symmetric and antisymmetric
    /// mixes of the unperturbed pair.
    pub fn perturbed_triplets(&self) -> Result<[EigenTriplet; 2], FloquetError> {
        self.check()?;
        self.check_resonance()?;
        let eps = self.v_static * (2.0 * self.omega - self.omega0) / (2.0 * self.omega);
        let plus_f = self.plus_function()?;
        let minus_f = self.minus_function()?;
        let s = core::f64::consts::FRAC_1_SQRT_2;
        let sym = FloquetFunction::mixed(
            &[&plus_f, &minus_f],
            &CVector::from_vec(alloc::vec![C64::from(s), C64::from(s)]),
        )?;
        let anti = FloquetFunction::mixed(
            &[&plus_f, &minus_f],
            &CVector::from_vec(alloc::vec![C64::from(s), C64::from(-s)]),
        )?;
        let plus = EigenTriplet::from_function(eps, sym, None)?;
        let minus = EigenTriplet::from_function(-eps, anti, None)?;
        Ok([plus, minus])
    }

    /// Exact propagator for `v_static = 0` (any drive strength); for
    /// `v_static != 0` the exact-at-resonance form
    /// `U(t) = U0(t) e^{-iε_+ t σx} U0(0)^dag`.
    pub fn analytic_propagator(&self, t: f64) -> Result<CMatrix, FloquetError> {
        self.check()?;
        let frame_t = self.frame(t)?;
        let frame_0 = self.frame(0.0)?;
        if self.v_static == 0.0 {
            let eps_plus = -(self.rabi() - self.omega) / 2.0;
            let rot = CMatrix::from_diagonal(&CVector::from_vec(alloc::vec![
                C64::from_polar(1.0, -eps_plus * t),
                C64::from_polar(1.0, eps_plus * t),
            ]));
            return Ok(frame_t * rot * frame_0.adjoint());
        }
        self.check_resonance()?;
        let eps = self.v_static * (2.0 * self.omega - self.omega0) / (2.0 * self.omega);
        let (cos, sin) = ((eps * t).cos(), (eps * t).sin());
        let mut rot = CMatrix::zeros(2, 2);
        rot[(0, 0)] = C64::from(cos);
        rot[(1, 1)] = C64::from(cos);
        rot[(0, 1)] = C64::new(0.0, -sin);
        rot[(1, 0)] = C64::new(0.0, -sin);
        Ok(frame_t * rot * frame_0.adjoint())
    }

    /// The state `cosθ·u⁰_+(0) + sinθ·u⁰_-(0)` in the bare basis.
    pub fn theta_state(&self, theta: f64) -> Result<StateVector, FloquetError> {
        let frame = self.frame(0.0)?;
        let mix = CVector::from_vec(alloc::vec![
            C64::from(theta.cos()),
            C64::from(theta.sin())
        ]);
        StateVector::normalized(frame * mix)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::max_abs;

    const SQRT_2: f64 = core::f64::consts::SQRT_2;

    fn params(v_drive: f64, v_static: f64) -> TwoLevelParams {
        TwoLevelParams { omega0: 1.0, omega: 1.5, v_drive, v_static }
    }

    #[test]
    fn resonance_triplets_have_half_splitting_averages() {
        let [plus, minus] = params(SQRT_2, 0.0).analytic_triplets().unwrap();
        assert!(plus.quasi_energy.abs() < 1e-12);
        assert!(minus.quasi_energy.abs() < 1e-12);
        assert!((plus.avg_energy + 0.5).abs() < 1e-12);
        assert!((minus.avg_energy - 0.5).abs() < 1e-12);
        assert!((plus.function.weight(0) - 2.0 / 3.0).abs() < 1e-12);
        assert!((plus.function.weight(-1) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn undriven_limit_swaps_branch_labels() {
        // V = 0, delta = 0.5: the + branch lands on the upper bare level
        let [plus, minus] = params(0.0, 0.0).analytic_triplets().unwrap();
        assert!((plus.avg_energy - 0.5).abs() < 1e-12);
        assert!((minus.avg_energy + 0.5).abs() < 1e-12);
    }

    #[test]
    fn off_resonance_values_match_closed_forms() {
        let p = params(1.0, 0.0);
        let [plus, _] = p.analytic_triplets().unwrap();
        assert!((plus.quasi_energy - 0.190_983_005_625_052_6).abs() < 1e-12);
        assert!((plus.avg_energy + 0.223_606_797_749_979).abs() < 1e-12);
    }

    #[test]
    fn perturbed_quasi_energies_scale_linearly() {
        let p = params(SQRT_2, 1e-3);
        let [plus, minus] = p.perturbed_triplets().unwrap();
        assert!((plus.quasi_energy - 6.666_666_666_666_667e-4).abs() < 1e-12);
        assert!((minus.quasi_energy + 6.666_666_666_666_667e-4).abs() < 1e-12);
        // average energies collapse onto the quasi-energies
        assert!((plus.avg_energy - plus.quasi_energy).abs() < 1e-12);
        assert!((minus.avg_energy - minus.quasi_energy).abs() < 1e-12);
    }

    #[test]
    fn perturbed_limit_v_zero_gives_equal_mixes() {
        let p = params(SQRT_2, 0.0);
        let [plus, minus] = p.perturbed_triplets().unwrap();
        assert_eq!(plus.quasi_energy, 0.0);
        assert_eq!(minus.quasi_energy, 0.0);
        let [up, um] = p.analytic_triplets().unwrap();
        let o = plus.function.extended_dot(&up.function).norm();
        assert!((o - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
        let o = minus.function.extended_dot(&um.function).norm();
        assert!((o - core::f64::consts::FRAC_1_SQRT_2).abs() < 1e-12);
    }

    #[test]
    fn perturbed_oracle_rejects_off_resonance() {
        let p = params(1.0, 1e-3);
        assert!(matches!(p.perturbed_triplets(), Err(FloquetError::OffResonance { .. })));
        assert!(matches!(p.analytic_propagator(1.0), Err(FloquetError::OffResonance { .. })));
    }

    #[test]
    fn propagator_is_unitary_and_identity_at_zero() {
        for v_static in [0.0, 1e-3] {
            let p = params(SQRT_2, v_static);
            let id = CMatrix::identity(2, 2);
            assert!(max_abs(&(p.analytic_propagator(0.0).unwrap() - &id)) < 1e-12);
            for t in [0.3, 4.7, 100.0] {
                let u = p.analytic_propagator(t).unwrap();
                assert!(max_abs(&(u.adjoint() * &u - &id)) < 1e-12, "t={t}");
            }
        }
    }

    #[test]
    fn triplets_reproduce_the_propagator() {
        // U(t) = sum_n e^{-i eps_n t} |u_n(t)><u_n(0)| against the frame form
        let p = params(1.0, 0.0);
        let [plus, minus] = p.analytic_triplets().unwrap();
        for t in [0.0, 0.9, 3.3] {
            let mut u = CMatrix::zeros(2, 2);
            for trip in [&plus, &minus] {
                let ut = trip.function.at(t);
                let u0 = trip.function.at_zero();
                let phase = C64::from_polar(1.0, -trip.quasi_energy * t);
                u += (ut * u0.adjoint()) * phase;
            }
            let reference = p.analytic_propagator(t).unwrap();
            assert!(max_abs(&(u - reference)) < 1e-12, "t={t}");
        }
    }

    #[test]
    fn perturbed_deviation_grows_linearly() {
        let v = 1e-3;
        let perturbed = params(SQRT_2, v);
        let unperturbed = params(SQRT_2, 0.0);
        let slope = v * (2.0 * 1.5 - 1.0) / (2.0 * 1.5);
        for t in [1.0, 5.0, 15.0] {
            let diff = perturbed.analytic_propagator(t).unwrap()
                - unperturbed.analytic_propagator(t).unwrap();
            let dev = max_abs(&diff);
            assert!((dev - (slope * t).sin().abs()).abs() < 0.2 * slope * t + 1e-12, "t={t}");
        }
        // reaches xi = 1e-2 around t ~ 15
        let dev15 = max_abs(
            &(perturbed.analytic_propagator(15.0).unwrap()
                - unperturbed.analytic_propagator(15.0).unwrap()),
        );
        assert!((dev15 - 1e-2).abs() < 2e-3, "deviation at t=15 is {dev15}");
    }

    #[test]
    fn theta_states_interpolate_the_resonance_basis() {
        let p = params(SQRT_2, 0.0);
        let [plus, minus] = p.analytic_triplets().unwrap();
        let s0 = p.theta_state(0.0).unwrap();
        let s1 = p.theta_state(core::f64::consts::FRAC_PI_2).unwrap();
        assert!((s0.amplitudes() - plus.function.at_zero()).norm() < 1e-12);
        assert!((s1.amplitudes() - minus.function.at_zero()).norm() < 1e-12);
        // quadratic form of the average-energy matrix at theta = pi/4
        let t = p.theta_state(core::f64::consts::FRAC_PI_4).unwrap();
        assert!((t.amplitudes().norm() - 1.0).abs() < 1e-12);
    }
}
