//! Open-system evolution of the exciton spin.
//!
//! The master equation acts on ρ over {|g⟩, |H⟩, |V⟩}:
//!
//! ```text
//! dρ/dt = −i/ħ [H(F(t)), ρ]
//!       + Γ_r  (D[|g⟩⟨H|] + D[|g⟩⟨V|]) ρ
//!       + γ/2  D[Z(t)] ρ                       Z = |u⟩⟨u| − |l⟩⟨l|
//!       + Γ_s  (D[|u⟩⟨l|] + D[|l⟩⟨u|]) ρ
//! ```
//!
//! with `u`/`l` the instantaneous upper/lower eigenstates of `H(F(t))`.
//! `D[L]ρ = LρL† − ½{L†L, ρ}`. Eigenbasis coherence then decays at `γ`
//! and the eigenstate population difference at `2Γ_s`.
//!
//! Integration is classic fixed-step RK4; every output time is hit exactly.

use nalgebra::{Matrix2, Matrix3, RowVector2};
use serde::{Deserialize, Serialize};

use crate::device::{eigenvectors_at_angle, DeviceParams, HBAR};
use crate::pulse::PulseProfile;
use crate::quadrature::integrate_split;
use crate::state::{ExcitonDensityMatrix, QubitState, Violation};
use crate::{Error, Result, C64};

/// Incoherent processes, all in ns⁻¹.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct NoiseChannels {
    pub radiative_rate: f64,
    pub dephasing_rate: f64,
    pub spin_flip_rate: f64,
}

impl NoiseChannels {
    pub fn none() -> Self {
        Self {
            radiative_rate: 0.0,
            dephasing_rate: 0.0,
            spin_flip_rate: 0.0,
        }
    }

    /// Radiative decay only; the conditional exciton state evolves coherently.
    pub fn radiative_only(params: &DeviceParams) -> Self {
        Self {
            radiative_rate: 1.0 / params.tau_r,
            ..Self::none()
        }
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("radiative_rate", self.radiative_rate),
            ("dephasing_rate", self.dephasing_rate),
            ("spin_flip_rate", self.spin_flip_rate),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite and ≥ 0, got {v}")));
            }
        }
        Ok(())
    }
}

/// Rates implied by the device lifetimes. `T_spin = ∞` disables spin flips.
pub fn build_noise(params: &DeviceParams) -> Result<NoiseChannels> {
    params.validate()?;
    Ok(NoiseChannels {
        radiative_rate: 1.0 / params.tau_r,
        dephasing_rate: 1.0 / params.t_cross,
        spin_flip_rate: 1.0 / (2.0 * params.t_spin),
    })
}

/// Coherent evolution for time `t` at splitting `s`: the second component
/// picks up `e^{i s t/ħ}` relative to the first. The state must be expressed
/// in the eigenbasis for which `s` is the splitting.
pub fn free_evolve(state: &QubitState, s: f64, t: f64) -> Result<QubitState> {
    if t < 0.0 {
        return Err(Error::Precondition(format!("t must be ≥ 0, got {t}")));
    }
    Ok(QubitState::new(
        state.a_h,
        state.a_v * C64::from_polar(1.0, s * t / HBAR),
    ))
}

/// Lab-frame free evolution at constant `field`: rotate into the (upper,
/// lower) eigenbasis, apply [`free_evolve`] with the splitting, rotate back.
pub fn free_evolve_at_field(
    state: &QubitState,
    params: &DeviceParams,
    field: f64,
    t: f64,
) -> Result<QubitState> {
    let (u, l) = params.eigenbasis(field);
    let v = state.as_vector();
    let in_eig = QubitState::new(u.dotc(&v), l.dotc(&v));
    let out = free_evolve(&in_eig, params.splitting(field), t)?;
    let lab = u * out.a_h + l * out.a_v;
    Ok(QubitState::from_vector(&lab))
}

/// Density matrices sampled on a time grid, with the field at each sample.
#[derive(Clone, Debug, PartialEq)]
pub struct Trajectory {
    pub times: Vec<f64>,
    pub fields: Vec<f64>,
    pub states: Vec<ExcitonDensityMatrix>,
}

impl Trajectory {
    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    /// First invariant violation along the trajectory, if any.
    pub fn first_violation(&self) -> Option<(f64, Violation)> {
        self.times
            .iter()
            .zip(&self.states)
            .find_map(|(&t, s)| s.check().err().map(|v| (t, v)))
    }

    pub fn violation_count(&self) -> usize {
        self.states.iter().filter(|s| s.check().is_err()).count()
    }

    /// Conditional (unit-trace) exciton blocks at each sample.
    pub fn conditional_states(&self) -> Result<Vec<Matrix2<C64>>> {
        self.times
            .iter()
            .zip(&self.states)
            .map(|(&t, s)| s.conditional_exciton().ok_or(Error::VanishingPopulation { time: t }))
            .collect()
    }
}

/// Fixed-step RK4 master-equation integrator.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Propagator {
    /// Maximum internal step, ns.
    pub max_step: f64,
}

impl Default for Propagator {
    fn default() -> Self {
        Self { max_step: 1.0e-3 }
    }
}

struct Generator<'a> {
    params: &'a DeviceParams,
    noise: &'a NoiseChannels,
    pulse: &'a PulseProfile,
}

impl Generator<'_> {
    fn eval(&self, t: f64, rho: &Matrix3<C64>) -> Matrix3<C64> {
        let field = self.pulse.field_at(t);
        let h = self.params.hamiltonian(field).matrix;
        let x: Matrix2<C64> = rho.fixed_view::<2, 2>(1, 1).into_owned();
        let gx: RowVector2<C64> = rho.fixed_view::<1, 2>(0, 1).into_owned();
        let n = self.noise;
        let mi = C64::new(0.0, -1.0 / HBAR);

        let mut dx = (h * x - x * h) * mi;
        // g–X coherence: coherent part plus half of every exciton loss channel
        let mut dgx = gx * h * C64::new(0.0, 1.0 / HBAR);
        let mut gx_loss = 0.5 * n.radiative_rate;

        if n.radiative_rate > 0.0 {
            dx -= x * C64::new(n.radiative_rate, 0.0);
        }
        if n.dephasing_rate > 0.0 || n.spin_flip_rate > 0.0 {
            let (u, l) = eigenvectors_at_angle(self.params.eigenbasis_angle_rad(field));
            let pu = u * u.adjoint();
            let pl = l * l.adjoint();
            if n.dephasing_rate > 0.0 {
                let z = pu - pl;
                dx += (z * x * z - x) * C64::new(0.5 * n.dephasing_rate, 0.0);
                gx_loss += 0.25 * n.dephasing_rate;
            }
            if n.spin_flip_rate > 0.0 {
                let pop_u = u.dotc(&(x * u));
                let pop_l = l.dotc(&(x * l));
                dx += (pu * pop_l + pl * pop_u - x) * C64::new(n.spin_flip_rate, 0.0);
                gx_loss += 0.5 * n.spin_flip_rate;
            }
        }
        dgx -= gx * C64::new(gx_loss, 0.0);

        let mut out = Matrix3::zeros();
        out[(0, 0)] = C64::new(n.radiative_rate * (x[(0, 0)] + x[(1, 1)]).re, 0.0);
        out.fixed_view_mut::<2, 2>(1, 1).copy_from(&dx);
        out.fixed_view_mut::<1, 2>(0, 1).copy_from(&dgx);
        out.fixed_view_mut::<2, 1>(1, 0).copy_from(&dgx.adjoint());
        out
    }
}

impl Propagator {
    pub fn with_step(max_step: f64) -> Self {
        Self { max_step }
    }

    /// Evolve `rho0` (taken to be the state at `t_grid[0]`) and return the
    /// state at every grid time.
    pub fn propagate(
        &self,
        rho0: &ExcitonDensityMatrix,
        pulse: &PulseProfile,
        params: &DeviceParams,
        noise: &NoiseChannels,
        t_grid: &[f64],
    ) -> Result<Trajectory> {
        if t_grid.is_empty() {
            return Err(Error::TimeGrid { index: 0 });
        }
        if let Some(i) = t_grid.windows(2).position(|w| !(w[1] > w[0])) {
            return Err(Error::TimeGrid { index: i + 1 });
        }
        if !(self.max_step > 0.0) {
            return Err(Error::invalid("max_step", "must be > 0"));
        }
        noise.validate()?;
        pulse.validate()?;

        let gen = Generator {
            params,
            noise,
            pulse,
        };
        let mut rho = rho0.rho;
        let mut times = Vec::with_capacity(t_grid.len());
        let mut fields = Vec::with_capacity(t_grid.len());
        let mut states = Vec::with_capacity(t_grid.len());
        times.push(t_grid[0]);
        fields.push(pulse.field_at(t_grid[0]));
        states.push(ExcitonDensityMatrix { rho });

        for w in t_grid.windows(2) {
            let (t0, t1) = (w[0], w[1]);
            let n = ((t1 - t0) / self.max_step - 1e-9).ceil().max(1.0) as usize;
            let h = (t1 - t0) / n as f64;
            for k in 0..n {
                let t = t0 + k as f64 * h;
                let hc = C64::new(h, 0.0);
                let half = C64::new(0.5 * h, 0.0);
                let k1 = gen.eval(t, &rho);
                let k2 = gen.eval(t + 0.5 * h, &(rho + k1 * half));
                let k3 = gen.eval(t + 0.5 * h, &(rho + k2 * half));
                let k4 = gen.eval(t + h, &(rho + k3 * hc));
                rho += (k1 + k2 * C64::new(2.0, 0.0) + k3 * C64::new(2.0, 0.0) + k4)
                    * C64::new(h / 6.0, 0.0);
            }
            if !rho.iter().all(|z| z.re.is_finite() && z.im.is_finite()) {
                return Err(Error::Integrator {
                    time: t1,
                    reason: "non-finite density matrix".into(),
                });
            }
            let tr = rho.trace().re;
            if (tr - rho0.trace()).abs() > 1e-6 {
                return Err(Error::Integrator {
                    time: t1,
                    reason: format!("trace drifted to {tr}"),
                });
            }
            times.push(t1);
            fields.push(pulse.field_at(t1));
            states.push(ExcitonDensityMatrix { rho });
        }
        Ok(Trajectory {
            times,
            fields,
            states,
        })
    }
}

/// Convenience wrapper using the default 1 ps step.
pub fn propagate(
    rho0: &ExcitonDensityMatrix,
    pulse: &PulseProfile,
    params: &DeviceParams,
    noise: &NoiseChannels,
    t_grid: &[f64],
) -> Result<Trajectory> {
    Propagator::default().propagate(rho0, pulse, params, noise, t_grid)
}

const PHASE_REL_TOL: f64 = 1e-11;

/// `∫₀ᵗ |s|(F(τ)) dτ / ħ`, radians.
pub fn accumulated_phase(pulse: &PulseProfile, params: &DeviceParams, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Precondition(format!("t must be ≥ 0, got {t}")));
    }
    let (v, _) = integrate_split(
        |tau| params.splitting(pulse.field_at(tau)),
        0.0,
        t,
        &pulse.breakpoints(),
        PHASE_REL_TOL,
        1e-300,
    );
    Ok(v / HBAR)
}

/// Phase added by the pulses relative to the baseline alone over `[0, t]`,
/// i.e. `accumulated_phase(pulse) − accumulated_phase(baseline)`, integrated
/// as a single difference for accuracy.
pub fn excess_phase(pulse: &PulseProfile, params: &DeviceParams, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Precondition(format!("t must be ≥ 0, got {t}")));
    }
    let s_base = params.splitting(pulse.baseline_field);
    let (lo, hi) = match pulse.active_window() {
        Some((lo, hi)) => (lo.max(0.0), hi.min(t)),
        None => return Ok(0.0),
    };
    if hi <= lo {
        return Ok(0.0);
    }
    let (v, _) = integrate_split(
        |tau| params.splitting(pulse.field_at(tau)) - s_base,
        lo,
        hi,
        &pulse.breakpoints(),
        PHASE_REL_TOL,
        1e-300,
    );
    Ok(v / HBAR)
}

/// Signed counterpart of [`accumulated_phase`]: `∫ sgn(δ)·|s| dτ / ħ`, the
/// phase of V relative to H in the lab frame at large detuning.
pub fn signed_phase(pulse: &PulseProfile, params: &DeviceParams, t: f64) -> Result<f64> {
    if t < 0.0 {
        return Err(Error::Precondition(format!("t must be ≥ 0, got {t}")));
    }
    let (v, _) = integrate_split(
        |tau| {
            let f = pulse.field_at(tau);
            params.splitting(f).copysign(params.detuning(f))
        },
        0.0,
        t,
        &pulse.breakpoints(),
        PHASE_REL_TOL,
        1e-300,
    );
    Ok(v / HBAR)
}

/// Uniform grid `t0, t0+dt, …` up to and including `t1` (within dt/1e6).
pub fn uniform_grid(t0: f64, t1: f64, dt: f64) -> Vec<f64> {
    let n = ((t1 - t0) / dt + 1e-6).floor() as usize;
    (0..=n).map(|i| t0 + i as f64 * dt).collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;
    use rand::SeedableRng;
    use std::f64::consts::PI;

    fn p() -> DeviceParams {
        DeviceParams::default()
    }

    #[test]
    fn noise_from_device() {
        let n = build_noise(&p()).unwrap();
        assert_relative_eq!(n.radiative_rate, 0.78125, epsilon = 1e-15);
        assert_relative_eq!(n.dephasing_rate, 1.0 / 3.0, epsilon = 1e-15);
        assert_relative_eq!(n.spin_flip_rate, 1.0 / 156.0, epsilon = 1e-15);
        let mut q = p();
        q.t_spin = f64::INFINITY;
        assert_eq!(build_noise(&q).unwrap().spin_flip_rate, 0.0);
        q.t_cross = -1.0;
        assert!(build_noise(&q).is_err());
    }

    #[test]
    fn free_evolve_examples() {
        let h = QubitState::h();
        let out = free_evolve(&h, 5.0, 3.7).unwrap();
        assert_relative_eq!(out.overlap(&h), 1.0, epsilon = 1e-15);

        let s = 5.111_674;
        let t = PI * HBAR / s;
        assert_relative_eq!(t, 0.4045, epsilon = 1e-4);
        let out = free_evolve(&QubitState::d(), s, t).unwrap();
        assert_relative_eq!(out.overlap(&QubitState::a()), 1.0, epsilon = 1e-15);

        let t = 2.0 * PI * HBAR / 5.0;
        assert_relative_eq!(t, 0.827, epsilon = 1e-3);
        let out = free_evolve(&QubitState::d(), 5.0, t).unwrap();
        assert_relative_eq!(out.overlap(&QubitState::d()), 1.0, epsilon = 1e-15);

        assert!(free_evolve(&h, 1.0, -1.0).is_err());
    }

    #[test]
    fn vacuum_is_stationary() {
        let n = build_noise(&p()).unwrap();
        let pulse = PulseProfile::single(-175.0, -19.3, 0.5, 0.389);
        let grid = uniform_grid(0.0, 3.0, 0.05);
        let traj = propagate(&ExcitonDensityMatrix::ground(), &pulse, &p(), &n, &grid).unwrap();
        for s in &traj.states {
            assert!((s.rho - ExcitonDensityMatrix::ground().rho).camax() < 1e-15);
        }
    }

    #[test]
    fn d_to_a_at_constant_field() {
        let params = p();
        let s = params.splitting(-175.0);
        let t = PI * HBAR / s;
        // D is not exactly equatorial in the tilted eigenbasis, so compare with
        // the eigenbasis-aware closed form, and with A only loosely.
        let grid = [0.0, t];
        let traj = propagate(
            &ExcitonDensityMatrix::from_exciton(&QubitState::d()),
            &PulseProfile::constant(-175.0),
            &params,
            &NoiseChannels::none(),
            &grid,
        )
        .unwrap();
        let exact = free_evolve_at_field(&QubitState::d(), &params, -175.0, t).unwrap();
        let rho = traj.states[1].exciton_block();
        assert!((1.0 - exact.expectation(&rho)).abs() < 1e-9);
        assert!(QubitState::a().expectation(&rho) > 0.97);
    }

    #[test]
    fn radiative_population_decay() {
        let params = p();
        let grid = uniform_grid(0.0, 5.0, 0.1);
        let traj = propagate(
            &ExcitonDensityMatrix::from_exciton(&QubitState::h()),
            &PulseProfile::constant(-175.0),
            &params,
            &NoiseChannels::radiative_only(&params),
            &grid,
        )
        .unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            assert_relative_eq!(s.exciton_population(), (-t / 1.28).exp(), max_relative = 1e-10);
            assert_eq!(s.check(), Ok(()));
        }
    }

    /// Coherence between the eigenstates, starting from an equal superposition
    /// of them, under pure dephasing only.
    #[test]
    fn dephasing_envelope() {
        let params = p();
        let field = -175.0;
        let (u, l) = params.eigenbasis(field);
        let plus = QubitState::from_vector(&((u + l) * C64::new(std::f64::consts::FRAC_1_SQRT_2, 0.0)));
        let noise = NoiseChannels {
            dephasing_rate: 1.0 / 3.0,
            ..NoiseChannels::none()
        };
        // three decades: e^{-t/3} down to 1e-3 at t ≈ 20.7 ns
        let grid = uniform_grid(0.0, 21.0, 0.5);
        let traj = propagate(
            &ExcitonDensityMatrix::from_exciton(&plus),
            &PulseProfile::constant(field),
            &params,
            &noise,
            &grid,
        )
        .unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let x = s.exciton_block();
            let coh = u.dotc(&(x * l)).norm();
            assert_relative_eq!(coh, 0.5 * (-t / 3.0).exp(), max_relative = 1e-3);
        }
    }

    #[test]
    fn spin_flip_relaxation() {
        let params = p();
        let field = -175.0;
        let (u, l) = params.eigenbasis(field);
        let noise = NoiseChannels {
            spin_flip_rate: 1.0 / (2.0 * 78.0),
            ..NoiseChannels::none()
        };
        let grid = uniform_grid(0.0, 300.0, 5.0);
        let traj = Propagator::with_step(0.01)
            .propagate(
                &ExcitonDensityMatrix::from_exciton(&QubitState::from_vector(&u)),
                &PulseProfile::constant(field),
                &params,
                &noise,
                &grid,
            )
            .unwrap();
        for (t, s) in traj.times.iter().zip(&traj.states) {
            let x = s.exciton_block();
            let diff = (u.dotc(&(x * u)) - l.dotc(&(x * l))).re;
            assert_relative_eq!(diff, (-t / 78.0).exp(), max_relative = 1e-3);
        }
    }

    #[test]
    fn dissipation_free_matches_closed_form() {
        let params = p();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for k in 0..20 {
            let field = -200.0 + 5.0 * k as f64;
            let psi = QubitState::random(&mut rng);
            let grid = uniform_grid(0.0, 2.0, 0.1);
            let traj = propagate(
                &ExcitonDensityMatrix::from_exciton(&psi),
                &PulseProfile::constant(field),
                &params,
                &NoiseChannels::none(),
                &grid,
            )
            .unwrap();
            for (t, s) in traj.times.iter().zip(&traj.states) {
                let exact = free_evolve_at_field(&psi, &params, field, *t).unwrap();
                let err = 1.0 - exact.expectation(&s.exciton_block());
                assert!(err.abs() < 1e-9, "field {field} t {t}: {err}");
            }
        }
    }

    #[test]
    fn rejects_bad_grid() {
        let r = propagate(
            &ExcitonDensityMatrix::ground(),
            &PulseProfile::constant(-175.0),
            &p(),
            &NoiseChannels::none(),
            &[0.0, 1.0, 1.0],
        );
        assert!(matches!(r, Err(Error::TimeGrid { index: 2 })));
        let r = propagate(
            &ExcitonDensityMatrix::ground(),
            &PulseProfile::constant(-175.0),
            &p(),
            &NoiseChannels::none(),
            &[],
        );
        assert!(r.is_err());
    }

    #[test]
    fn integrator_failure_reports_time() {
        let bad = NoiseChannels {
            radiative_rate: 1e6,
            ..NoiseChannels::none()
        };
        let r = Propagator::with_step(0.01).propagate(
            &ExcitonDensityMatrix::from_exciton(&QubitState::d()),
            &PulseProfile::constant(-175.0),
            &p(),
            &bad,
            &[0.0, 0.5, 1.0],
        );
        match r {
            Err(Error::Integrator { time, .. }) => assert_eq!(time, 0.5),
            other => panic!("expected integrator failure, got {other:?}"),
        }
    }

    #[test]
    fn phase_examples() {
        let params = p();
        let base = PulseProfile::constant(-175.0);
        assert_eq!(accumulated_phase(&base, &params, 0.0).unwrap(), 0.0);

        // field with |s| = 5 exactly
        let delta = (25.0_f64 - 0.16).sqrt();
        let f5 = params.f0 - delta / params.gradient_k;
        assert_relative_eq!(params.splitting(f5), 5.0, epsilon = 1e-12);
        let t = 2.0 * PI * HBAR / 5.0;
        let phi = accumulated_phase(&PulseProfile::constant(f5), &params, t).unwrap();
        assert_relative_eq!(phi, 2.0 * PI, max_relative = 1e-10);
    }

    /// Pulse raising the splitting by a Gaussian of peak 5 µeV: area oracle.
    #[test]
    fn gaussian_splitting_area_oracle() {
        // A·σ·√(2π) = πħ with A = 5 µeV
        let sigma = PI * HBAR / (5.0 * (2.0 * PI).sqrt());
        let fwhm = sigma * crate::pulse::FWHM_PER_SIGMA;
        assert_relative_eq!(fwhm, 0.389, epsilon = 1e-3);
        // A device with zero s0 tuned so that the baseline splitting is 5 µeV
        // and the splitting is exactly linear in field.
        let params = DeviceParams {
            s0: 1e-300,
            ..p()
        };
        let base = params.f0 - 5.0 / params.gradient_k;
        let pulse = PulseProfile::single(base, -5.0 / params.gradient_k, 2.0, fwhm);
        let extra = excess_phase(&pulse, &params, 10.0).unwrap();
        assert_relative_eq!(extra, PI, max_relative = 1e-9);
        let with = accumulated_phase(&pulse, &params, 10.0).unwrap();
        let without = accumulated_phase(&pulse.baseline_only(), &params, 10.0).unwrap();
        assert_relative_eq!(with - without, PI, max_relative = 1e-8);
    }

    #[test]
    fn signed_phase_mirror_symmetry() {
        let params = p();
        for (x, a) in [(20.0, 15.0), (40.0, 8.0), (25.0, 19.3)] {
            let lo = PulseProfile::single(params.f0 - x, -a, 1.0, 0.389);
            let hi = PulseProfile::single(params.f0 + x, a, 1.0, 0.389);
            let pl = signed_phase(&lo, &params, 3.0).unwrap();
            let ph = signed_phase(&hi, &params, 3.0).unwrap();
            assert_relative_eq!(pl, -ph, max_relative = 1e-10);
            let el = excess_phase(&lo, &params, 3.0).unwrap();
            let eh = excess_phase(&hi, &params, 3.0).unwrap();
            assert_relative_eq!(el, eh, max_relative = 1e-10);
        }
    }
}
