//! Electrical gate experiments: pulse calibration, phase extraction, and
//! interface/gate fidelities.
//!
//! Gate fidelity follows the normalized definitions
//!
//! ```text
//! pure:  f_G = |⟨ψ_G|U|ψ_in⟩|² / f_in
//! mixed: f_G = Tr[ρ_G U ρ_X U†] / Tr[ρ_X²]
//! ```
//!
//! where ρ_X is the state without the gate and ρ_G the state with it, both
//! taken at the same time. Model-level fidelities use the conditional exciton
//! blocks; measured fidelities use Bloch vectors reconstructed from detector
//! traces.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::device::{DeviceParams, HBAR};
use crate::dynamics::{excess_phase, NoiseChannels, Propagator, Trajectory};
use crate::fit::{fit_phase, wrap_phase, PhaseFit};
use crate::photonics::{derive_seed, detect, encode_exciton, normalize_pair, DetectionModel};
use crate::pulse::{GaussianPulse, PulseProfile};
use crate::state::{ExcitonDensityMatrix, Polarization, QubitState};
use crate::tomography::ThreeBasisTraces;
use crate::trace::{TimeTrace, TraceKind};
use crate::{Error, Result, C64};

/// Fidelities may exceed 1 by this much before being reported as clipped.
pub const FIDELITY_SLACK: f64 = 1e-9;

/// Model-level interface fidelity `⟨ψ_in|ρ̃_X(t)|ψ_in⟩`, with ρ̃_X the
/// exciton block renormalized to unit trace.
pub fn interface_fidelity(traj: &Trajectory, psi_in: &Polarization) -> Result<Vec<f64>> {
    Ok(traj
        .conditional_states()?
        .iter()
        .map(|rho| psi_in.expectation(rho).clamp(0.0, 1.0))
        .collect())
}

/// Interface fidelity as measured: the detected `ψ_in` channel normalized by
/// the sum with its orthogonal partner.
pub fn measured_interface_fidelity(
    traj: &Trajectory,
    psi_in: &Polarization,
    params: &DeviceParams,
    det: &DetectionModel,
    seed: u64,
) -> Result<TimeTrace> {
    let p = detect(traj, psi_in, params, det, derive_seed(seed, 0))?;
    let q = detect(traj, &psi_in.orthogonal(), params, det, derive_seed(seed, 1))?;
    Ok(normalize_pair(&p, &q)?.renamed("f_in"))
}

/// `|⟨ψ_G|U|ψ_in⟩|² / f_in`. The raw ratio is returned; values above one
/// (possible with measured `f_in`) are left to the caller to flag.
pub fn gate_fidelity_state(
    psi_g: &Polarization,
    u: &Matrix2<C64>,
    psi_in: &Polarization,
    f_in: f64,
) -> Result<f64> {
    if !(f_in > 0.0) {
        return Err(Error::ZeroInterfaceFidelity(f_in));
    }
    let target = QubitState::from_vector(&(u * psi_in.as_vector()));
    Ok(psi_g.overlap(&target) / f_in)
}

/// `Tr[ρ_G U ρ_X U†] / Tr[ρ_X²]` on 2×2 polarization/exciton blocks.
pub fn gate_fidelity_dm(rho_g: &Matrix2<C64>, u: &Matrix2<C64>, rho_x: &Matrix2<C64>) -> Result<f64> {
    let purity = (rho_x * rho_x).trace().re;
    if !(purity > 0.0) {
        return Err(Error::ZeroPurity);
    }
    let ideal = u * rho_x * u.adjoint();
    Ok((rho_g * ideal).trace().re / purity)
}

/// Ideal phase gate `exp(−iφZ/2)` in the eigenbasis at `field`, Z = |u⟩⟨u| − |l⟩⟨l|.
/// The phase is applied in the same sense as free precession.
pub fn phase_gate_unitary(params: &DeviceParams, field: f64, phi: f64) -> Matrix2<C64> {
    let (u, l) = params.eigenbasis(field);
    u * u.adjoint() * C64::from_polar(1.0, -0.5 * phi) + l * l.adjoint() * C64::from_polar(1.0, 0.5 * phi)
}

/// Ideal spin flip: the D↔A exchange, `diag(1, −1)` in the lab {H, V} basis.
pub fn spin_flip_unitary() -> Matrix2<C64> {
    Matrix2::new(
        C64::new(1.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(0.0, 0.0),
        C64::new(-1.0, 0.0),
    )
}

/// Phase difference across a gate, from a pair-normalized trace.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseExtraction {
    /// φ_post − φ_pre, radians (disambiguated if an expectation was given).
    pub phase: f64,
    pub wrapped: f64,
    pub pre: PhaseFit,
    pub post: PhaseFit,
}

/// Fit `c + V cos(s_base·t/ħ + φ)` separately before `gate_center − guard`
/// and after `gate_center + guard`, and return `φ_post − φ_pre`.
///
/// The difference is wrapped to (−π, π]; with `expected` the multiple of 2π
/// closest to it is added back.
pub fn extract_phase(
    trace: &TimeTrace,
    s_base: f64,
    gate_center: f64,
    guard: f64,
    expected: Option<f64>,
) -> Result<PhaseExtraction> {
    if !(s_base > 0.0) {
        return Err(Error::invalid("s_base", "must be > 0"));
    }
    let omega = s_base / HBAR;
    let period = std::f64::consts::TAU / omega;
    let pts: Vec<(f64, f64)> = trace.points().collect();
    let segment = |pre: bool| -> Result<PhaseFit> {
        let (t, y): (Vec<f64>, Vec<f64>) = pts
            .iter()
            .filter(|(t, _)| if pre { *t < gate_center - guard } else { *t > gate_center + guard })
            .copied()
            .unzip();
        let span = match (t.first(), t.last()) {
            (Some(a), Some(b)) => b - a,
            _ => 0.0,
        };
        let found = span / period;
        if found < crate::fit::MIN_PERIODS {
            return Err(Error::InsufficientPeriods {
                found,
                required: crate::fit::MIN_PERIODS,
            });
        }
        fit_phase(&t, &y, omega)
    };
    let pre = segment(true)?;
    let post = segment(false)?;
    let wrapped = wrap_phase(post.phase - pre.phase);
    let phase = match expected {
        Some(e) => wrapped + std::f64::consts::TAU * ((e - wrapped) / std::f64::consts::TAU).round(),
        None => wrapped,
    };
    Ok(PhaseExtraction {
        phase,
        wrapped,
        pre,
        post,
    })
}

/// Which way a calibrated pulse moves the field relative to the anticrossing.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PulseDirection {
    /// |s| grows; the added phase is positive and unbounded.
    AwayFromAnticrossing,
    /// |s| shrinks; the peak may not pass F0, so only a bounded phase can be
    /// removed. `target_phase` is then the magnitude of the removed phase.
    TowardAnticrossing,
}

/// Find the single-Gaussian amplitude whose added phase (relative to the
/// baseline alone) equals `target_phase`, pushing the field away from the
/// anticrossing. The residual is below 1e−6 rad.
pub fn calibrate_pulse(
    target_phase: f64,
    fwhm: f64,
    baseline_field: f64,
    center: f64,
    params: &DeviceParams,
) -> Result<PulseProfile> {
    calibrate_pulse_with(
        target_phase,
        fwhm,
        baseline_field,
        center,
        params,
        PulseDirection::AwayFromAnticrossing,
    )
}

/// [`calibrate_pulse`] with an explicit direction. Toward the anticrossing
/// the peak field is limited to F0; an unreachable phase is a
/// [`Error::Bracket`].
pub fn calibrate_pulse_with(
    target_phase: f64,
    fwhm: f64,
    baseline_field: f64,
    center: f64,
    params: &DeviceParams,
    direction: PulseDirection,
) -> Result<PulseProfile> {
    params.validate()?;
    if !(target_phase >= 0.0) || !target_phase.is_finite() {
        return Err(Error::invalid("target_phase", format!("must be ≥ 0, got {target_phase}")));
    }
    if !(fwhm > 0.0) {
        return Err(Error::invalid("fwhm", "must be > 0"));
    }
    let offset = baseline_field - params.f0;
    let away = if offset < 0.0 { -1.0 } else { 1.0 };
    let (sign, phase_sign, limit) = match direction {
        PulseDirection::AwayFromAnticrossing => (away, 1.0, MAX_AMPLITUDE),
        PulseDirection::TowardAnticrossing => (-away, -1.0, offset.abs()),
    };
    let profile = |a: f64| PulseProfile::single(baseline_field, sign * a, center, fwhm);
    if target_phase == 0.0 {
        return Ok(profile(0.0));
    }
    let t_end = center + 20.0 * fwhm;
    let g = |a: f64| -> Result<f64> { Ok(phase_sign * excess_phase(&profile(a), params, t_end)? - target_phase) };

    let sigma = fwhm / crate::pulse::FWHM_PER_SIGMA;
    // large-detuning estimate: phase ≈ |k|·A·σ·√(2π)/ħ
    let guess = target_phase * HBAR / (params.gradient_k.abs() * sigma * std::f64::consts::TAU.sqrt());
    let mut hi = guess.min(limit);
    let mut g_hi = g(hi)?;
    while g_hi <= 0.0 {
        if hi >= limit {
            return Err(Error::Bracket(format!(
                "phase {target_phase} rad not reachable with |amplitude| ≤ {limit} kV/cm (anticrossing at {} kV/cm)",
                params.f0
            )));
        }
        hi = (hi * 1.5).min(limit);
        g_hi = g(hi)?;
    }
    let (mut lo, mut g_lo) = (0.0, -target_phase);
    // Illinois regula falsi
    let mut side = 0;
    let mut a = hi;
    for _ in 0..200 {
        a = (lo * g_hi - hi * g_lo) / (g_hi - g_lo);
        let ga = g(a)?;
        if ga.abs() < 1e-9 || (hi - lo) < 1e-13 * hi.max(1.0) {
            break;
        }
        if ga > 0.0 {
            hi = a;
            g_hi = ga;
            if side == 1 {
                g_lo *= 0.5;
            }
            side = 1;
        } else {
            lo = a;
            g_lo = ga;
            if side == -1 {
                g_hi *= 0.5;
            }
            side = -1;
        }
    }
    let residual = g(a)?.abs();
    if residual > 1e-6 {
        return Err(Error::Bracket(format!("calibration residual {residual} rad")));
    }
    Ok(profile(a))
}

/// Largest pulse excursion the calibrator will consider, kV/cm.
pub const MAX_AMPLITUDE: f64 = 1.0e4;

/// Shared inputs of a gate experiment.
#[derive(Clone, Debug, PartialEq)]
pub struct GateSetup {
    pub params: DeviceParams,
    pub noise: NoiseChannels,
    pub det: DetectionModel,
    pub t_grid: Vec<f64>,
    pub seed: u64,
    /// Also simulate detection and report fidelities from reconstructed states.
    pub measure: bool,
    /// Integrator step, ns.
    pub step: f64,
}

impl GateSetup {
    fn propagate(&self, rho0: &ExcitonDensityMatrix, pulse: &PulseProfile) -> Result<Trajectory> {
        Propagator::with_step(self.step).propagate(rho0, pulse, &self.params, &self.noise, &self.t_grid)
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "gate", rename_all = "snake_case")]
pub enum GateKind {
    PhaseShift { target_phase: f64 },
    SpinFlip,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct GateResult {
    #[serde(flatten)]
    pub kind: GateKind,
    pub input_bloch: [f64; 3],
    pub pulse_used: PulseProfile,
    /// Model-level `f_G(t)` from conditional states.
    pub fidelity_vs_time: TimeTrace,
    /// `f_G(t)` from three-basis tomography of the detected traces.
    pub measured_fidelity: Option<TimeTrace>,
    pub extracted_phase: Option<f64>,
    /// First grid time at least two FWHM after the (first) pulse peak.
    pub post_gate_time: f64,
    pub post_gate_fidelity: f64,
    /// Bins whose raw fidelity exceeded one and were clipped.
    pub clipped_bins: usize,
}

impl GateResult {
    /// Model-level fidelity on bins whose centre is at or after `t`.
    pub fn fidelity_after(&self, t: f64) -> Vec<f64> {
        self.fidelity_vs_time.points().filter(|(c, _)| *c >= t).map(|(_, v)| v).collect()
    }
}

fn gate_window(pulse: &PulseProfile) -> Option<(f64, f64)> {
    pulse.pulses.first().map(|p| (p.center, p.fwhm))
}

fn post_gate_time(pulse: &PulseProfile, grid: &[f64]) -> f64 {
    match gate_window(pulse) {
        Some((c, w)) => grid.iter().copied().find(|t| *t >= c + 2.0 * w).unwrap_or(grid[grid.len() - 1]),
        None => grid[0],
    }
}

/// Per-bin model and measured fidelities of `gated` against `U·ungated·U†`.
fn fidelity_series(
    setup: &GateSetup,
    gated: &Trajectory,
    ungated: &Trajectory,
    u: &Matrix2<C64>,
) -> Result<(TimeTrace, Option<TimeTrace>, usize)> {
    let bin = if setup.t_grid.len() > 1 {
        setup.t_grid[1] - setup.t_grid[0]
    } else {
        setup.det.time_bin
    };
    let g = gated.conditional_states()?;
    let x = ungated.conditional_states()?;
    let mut clipped = 0;
    let mut values = Vec::with_capacity(g.len());
    for (rg, rx) in g.iter().zip(&x) {
        let f = gate_fidelity_dm(rg, u, rx)?;
        if f > 1.0 + FIDELITY_SLACK {
            clipped += 1;
        }
        values.push(f.clamp(0.0, 1.0));
    }
    let model = TimeTrace::from_centers("f_G", &setup.t_grid, values, bin)?;

    let measured = if setup.measure {
        let mg = ThreeBasisTraces::measure(gated, &setup.params, &setup.det, derive_seed(setup.seed, 10))?
            .reconstruct()?;
        let mx = ThreeBasisTraces::measure(ungated, &setup.params, &setup.det, derive_seed(setup.seed, 20))?
            .reconstruct()?;
        let mut vals = Vec::with_capacity(mg.times.len());
        let mut valid = Vec::with_capacity(mg.times.len());
        for i in 0..mg.times.len() {
            match (mg.density(i), mx.density(i)) {
                (Some(rg), Some(rx)) => match gate_fidelity_dm(&rg, u, &rx) {
                    Ok(f) => {
                        if f > 1.0 + FIDELITY_SLACK {
                            clipped += 1;
                        }
                        vals.push(f.clamp(0.0, 1.0));
                        valid.push(true);
                    }
                    Err(_) => {
                        vals.push(0.0);
                        valid.push(false);
                    }
                },
                _ => {
                    vals.push(0.0);
                    valid.push(false);
                }
            }
        }
        let mut tr = TimeTrace::from_centers("f_G_measured", &setup.t_grid, vals, bin)?;
        tr.valid = valid;
        tr.kind = TraceKind::Intensity;
        Some(tr)
    } else {
        None
    };
    Ok((model, measured, clipped))
}

/// Phase-shift gate on `psi_in` at the pulse baseline. The ideal operation is
/// [`phase_gate_unitary`] with `target_phase`.
pub fn run_phase_gate(
    setup: &GateSetup,
    pulse: &PulseProfile,
    psi_in: &Polarization,
    target_phase: f64,
) -> Result<GateResult> {
    let rho0 = encode_exciton(psi_in)?;
    let gated = setup.propagate(&rho0, pulse)?;
    let ungated = setup.propagate(&rho0, &pulse.baseline_only())?;
    let u = phase_gate_unitary(&setup.params, pulse.baseline_field, target_phase);
    let (fid, measured, clipped) = fidelity_series(setup, &gated, &ungated, &u)?;

    let extracted_phase = match gate_window(pulse) {
        Some((center, fwhm)) => {
            let trace = if setup.measure {
                measured_interface_fidelity(&gated, psi_in, &setup.params, &setup.det, derive_seed(setup.seed, 30))?
            } else {
                normalized_model_trace(&gated, psi_in, &setup.params)?
            };
            let expected = excess_phase(pulse, &setup.params, setup.t_grid[setup.t_grid.len() - 1])?;
            extract_phase(
                &trace,
                setup.params.splitting(pulse.baseline_field),
                center,
                phase_guard(pulse, fwhm, &setup.det),
                Some(expected),
            )
            .ok()
            .map(|e| e.phase)
        }
        None => None,
    };
    let t_post = post_gate_time(pulse, &setup.t_grid);
    let post_gate_fidelity = fid.points().find(|(t, _)| *t >= t_post - 1e-12).map_or(0.0, |p| p.1);
    Ok(GateResult {
        kind: GateKind::PhaseShift { target_phase },
        input_bloch: psi_in.bloch(),
        pulse_used: pulse.clone(),
        fidelity_vs_time: fid,
        measured_fidelity: measured,
        extracted_phase,
        post_gate_time: t_post,
        post_gate_fidelity,
        clipped_bins: clipped,
    })
}

/// Exclusion half-width around a pulse for phase fitting: pulse edges,
/// detector smearing and (if present) ringing.
pub fn phase_guard(pulse: &PulseProfile, fwhm: f64, det: &DetectionModel) -> f64 {
    let ring = pulse.ringing.map_or(0.0, |r| 3.0 * r.damping_time);
    2.0 * fwhm + 4.0 * det.timing_sigma() + ring
}

/// Normalized `ψ / (ψ + ψ⊥)` trace with a perfect detector.
pub fn normalized_model_trace(traj: &Trajectory, psi: &Polarization, params: &DeviceParams) -> Result<TimeTrace> {
    let p = crate::photonics::emission_intensity(traj, psi, params)?;
    let q = crate::photonics::emission_intensity(traj, &psi.orthogonal(), params)?;
    normalize_pair(&p, &q)
}

/// Spin flip at the anticrossing: D (an eigenstate at F0) is carried to A.
pub fn run_spin_flip(setup: &GateSetup, pulse: &PulseProfile) -> Result<GateResult> {
    if (pulse.baseline_field - setup.params.f0).abs() > 1e-6 {
        return Err(Error::Precondition(format!(
            "spin flip must start at the anticrossing F0 = {} kV/cm, baseline is {}",
            setup.params.f0, pulse.baseline_field
        )));
    }
    let psi_in = QubitState::d();
    let rho0 = encode_exciton(&psi_in)?;
    let gated = setup.propagate(&rho0, pulse)?;
    let ungated = setup.propagate(&rho0, &pulse.baseline_only())?;
    let (fid, measured, clipped) = fidelity_series(setup, &gated, &ungated, &spin_flip_unitary())?;
    let t_post = post_gate_time(pulse, &setup.t_grid);
    let post_gate_fidelity = fid.points().find(|(t, _)| *t >= t_post - 1e-12).map_or(0.0, |p| p.1);
    Ok(GateResult {
        kind: GateKind::SpinFlip,
        input_bloch: psi_in.bloch(),
        pulse_used: pulse.clone(),
        fidelity_vs_time: fid,
        measured_fidelity: measured,
        extracted_phase: None,
        post_gate_time: t_post,
        post_gate_fidelity,
        clipped_bins: clipped,
    })
}

/// Spin-flip pulse: the π phase-gate pulse calibrated at `phase_gate_baseline`
/// (same |amplitude| and width), applied from F0 and pointing to higher field.
pub fn calibrate_spin_flip(
    fwhm: f64,
    center: f64,
    phase_gate_baseline: f64,
    params: &DeviceParams,
) -> Result<PulseProfile> {
    let pi = calibrate_pulse(std::f64::consts::PI, fwhm, phase_gate_baseline, center, params)?;
    Ok(PulseProfile::single(params.f0, pi.pulses[0].amplitude.abs(), center, fwhm))
}

/// Both trajectories of a gate experiment, for export.
pub fn gate_trajectories(
    setup: &GateSetup,
    pulse: &PulseProfile,
    psi_in: &Polarization,
) -> Result<(Trajectory, Trajectory)> {
    let rho0: ExcitonDensityMatrix = encode_exciton(psi_in)?;
    Ok((setup.propagate(&rho0, pulse)?, setup.propagate(&rho0, &pulse.baseline_only())?))
}

/// Single Gaussian of `pulse`, if it has exactly one.
pub fn single_pulse(pulse: &PulseProfile) -> Option<GaussianPulse> {
    (pulse.pulses.len() == 1).then(|| pulse.pulses[0])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{accumulated_phase, build_noise, uniform_grid};
    use approx::assert_relative_eq;
    use std::f64::consts::{FRAC_PI_2, PI};

    fn noise_free_setup(t1: f64) -> GateSetup {
        let params = DeviceParams::default();
        GateSetup {
            params,
            noise: NoiseChannels::radiative_only(&params),
            det: DetectionModel::ideal(),
            t_grid: uniform_grid(0.0, t1, 0.025),
            seed: 1,
            measure: false,
            step: 1.0e-3,
        }
    }

    #[test]
    fn state_fidelity_examples() {
        let id = Matrix2::identity();
        let d = QubitState::d();
        assert_relative_eq!(gate_fidelity_state(&d, &id, &d, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        let pi_gate = Matrix2::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0), C64::new(0.0, 0.0), C64::from_polar(1.0, PI));
        let a = QubitState::a();
        assert_relative_eq!(gate_fidelity_state(&a, &pi_gate, &d, 1.0).unwrap(), 1.0, epsilon = 1e-15);
        // a π/2 gate delivers R instead of A
        assert_relative_eq!(gate_fidelity_state(&QubitState::r(), &pi_gate, &d, 1.0).unwrap(), 0.5, epsilon = 1e-15);
        assert!(matches!(gate_fidelity_state(&d, &id, &d, 0.0), Err(Error::ZeroInterfaceFidelity(_))));
    }

    #[test]
    fn dm_fidelity_perfect_gate_and_zero_purity() {
        let u = phase_gate_unitary(&DeviceParams::default(), -175.0, 1.3);
        let rho = crate::state::density_from_bloch([0.2, 0.5, -0.1]);
        let rg = u * rho * u.adjoint();
        assert_relative_eq!(gate_fidelity_dm(&rg, &u, &rho).unwrap(), 1.0, epsilon = 1e-14);
        assert!(matches!(gate_fidelity_dm(&rho, &u, &Matrix2::zeros()), Err(Error::ZeroPurity)));
    }

    #[test]
    fn phase_gate_unitary_matches_free_precession() {
        let params = DeviceParams::default();
        let field = -175.0;
        let t = 0.3;
        let phi = params.splitting(field) * t / HBAR;
        let u = phase_gate_unitary(&params, field, phi);
        let psi = QubitState::from_angles(0.4, 0.9);
        let evolved = crate::dynamics::free_evolve_at_field(&psi, &params, field, t).unwrap();
        let gated = QubitState::from_vector(&(u * psi.as_vector()));
        assert_relative_eq!(evolved.overlap(&gated), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn calibration_examples() {
        let params = DeviceParams::default();
        let p0 = calibrate_pulse(0.0, 0.389, -175.0, 2.0, &params).unwrap();
        assert_eq!(p0.pulses[0].amplitude, 0.0);
        let pi = calibrate_pulse(PI, 0.389, -175.0, 2.0, &params).unwrap();
        let a_pi = pi.pulses[0].amplitude;
        assert!(a_pi < 0.0, "pulse must move away from F0");
        assert!((a_pi.abs() - 19.3).abs() < 0.3, "{a_pi}");
        let peak = params.splitting(-175.0 + a_pi);
        assert!((peak - 10.2).abs() < 0.2, "{peak}");
        let resid = excess_phase(&pi, &params, 12.0).unwrap() - PI;
        assert!(resid.abs() < 1e-6);
        let two_pi = calibrate_pulse(2.0 * PI, 0.389, -175.0, 2.0, &params).unwrap();
        let ratio = two_pi.pulses[0].amplitude / a_pi;
        assert!((ratio - 2.0).abs() < 0.1, "{ratio}");
    }

    #[test]
    fn calibration_refuses_to_cross_anticrossing() {
        let params = DeviceParams::default();
        // at most ∫(|s| − s0) can be removed before the peak reaches F0
        assert!(matches!(
            calibrate_pulse_with(PI, 0.389, -160.0, 2.0, &params, PulseDirection::TowardAnticrossing),
            Err(Error::Bracket(_))
        ));
        let p = calibrate_pulse_with(0.2, 0.389, -175.0, 2.0, &params, PulseDirection::TowardAnticrossing).unwrap();
        let a = p.pulses[0].amplitude;
        assert!(a > 0.0 && a < 19.6);
        assert_relative_eq!(excess_phase(&p, &params, 12.0).unwrap(), -0.2, epsilon = 1e-6);
    }

    #[test]
    fn no_gate_extracts_zero() {
        let setup = noise_free_setup(6.0);
        let params = setup.params;
        let pulse = PulseProfile::single(-175.0, 0.0, 2.5, 0.389);
        let r = run_phase_gate(&setup, &pulse, &QubitState::d(), 0.0).unwrap();
        let phi = r.extracted_phase.unwrap();
        assert!(phi.abs() < 0.02, "{phi}");
        // identity gate, identical runs
        assert!(r.fidelity_vs_time.values.iter().all(|f| (f - 1.0).abs() < 1e-9));
        assert!(params.splitting(-175.0) > 5.0);
    }

    #[test]
    fn calibrated_pi_gate_extracts_pi() {
        let setup = noise_free_setup(6.0);
        let pulse = calibrate_pulse(PI, 0.389, -175.0, 2.5, &setup.params).unwrap();
        let r = run_phase_gate(&setup, &pulse, &QubitState::d(), PI).unwrap();
        let phi = r.extracted_phase.unwrap();
        assert!((phi - PI).abs() < 0.05, "{phi}");
        assert!(r.post_gate_fidelity > 0.99, "{}", r.post_gate_fidelity);
    }

    #[test]
    fn spin_flip_needs_anticrossing_and_flips() {
        let setup = noise_free_setup(4.0);
        let params = setup.params;
        let bad = PulseProfile::single(-175.0, 19.2, 0.5, 0.389);
        assert!(matches!(run_spin_flip(&setup, &bad), Err(Error::Precondition(_))));

        let none = PulseProfile::constant(params.f0);
        let r = run_spin_flip(&setup, &none).unwrap();
        assert!(r.fidelity_vs_time.values[0] < 1e-12);

        let pulse = calibrate_spin_flip(0.389, 0.5, -175.0, &params).unwrap();
        let r = run_spin_flip(&setup, &pulse).unwrap();
        assert!(r.post_gate_fidelity >= 0.95, "{}", r.post_gate_fidelity);
    }

    #[test]
    fn accumulated_phase_consistent_with_excess() {
        let params = DeviceParams::default();
        let pulse = calibrate_pulse(FRAC_PI_2, 0.389, -175.0, 2.0, &params).unwrap();
        let t = 6.0;
        let base = accumulated_phase(&pulse.baseline_only(), &params, t).unwrap();
        let with = accumulated_phase(&pulse, &params, t).unwrap();
        assert_relative_eq!(with - base, FRAC_PI_2, epsilon = 1e-8);
    }

    #[test]
    fn default_noise_interface_fidelity_eigenstate() {
        let params = DeviceParams::default();
        let setup = GateSetup {
            noise: build_noise(&params).unwrap(),
            ..noise_free_setup(10.0)
        };
        let rho0 = encode_exciton(&QubitState::v()).unwrap();
        let traj = crate::dynamics::propagate(&rho0, &PulseProfile::constant(-175.0), &params, &setup.noise, &setup.t_grid).unwrap();
        let f = interface_fidelity(&traj, &QubitState::v()).unwrap();
        // V is nearly the upper eigenstate at −175 kV/cm; spin flips relax it
        for (t, v) in setup.t_grid.iter().zip(&f) {
            assert!(*v <= 1.0 && *v > 0.5 * (1.0 + (-t / 78.0).exp()) - 1e-2, "t={t}");
        }
    }
}
