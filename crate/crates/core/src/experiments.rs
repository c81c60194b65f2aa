//! Figure-level experiments: each run produces CSV artifacts, a JSON summary
//! and a list of threshold checks taken from the config.

use std::path::{Path, PathBuf};

use serde::Serialize;
use serde_json::{json, Value};

use crate::config::{Band, ExperimentConfig, ExperimentName};
use crate::device::{DeviceParams, HBAR};
use crate::dynamics::{excess_phase, NoiseChannels, Propagator, Trajectory};
use crate::export::{self, Table};
use crate::fit::{fit_exponential, fit_splitting, linear_fit, SplittingFit};
use crate::gates::{
    calibrate_pulse, calibrate_spin_flip, extract_phase, gate_trajectories, interface_fidelity,
    measured_interface_fidelity, phase_guard, run_phase_gate, run_spin_flip, GateResult, GateSetup,
};
use crate::parallel::Execution;
use crate::photonics::{derive_seed, detect, encode_exciton};
use crate::pulse::PulseProfile;
use crate::state::{Polarization, QubitState};
use crate::tomography::ThreeBasisTraces;
use crate::trace::TimeTrace;
use crate::{Error, Result};

/// One threshold comparison.
#[derive(Clone, Debug, PartialEq, Serialize)]
pub struct Check {
    pub name: String,
    pub value: f64,
    pub lower: f64,
    pub upper: f64,
    pub passed: bool,
}

impl Check {
    pub fn range(name: impl Into<String>, value: f64, lower: f64, upper: f64) -> Self {
        Self {
            name: name.into(),
            value,
            lower,
            upper,
            passed: value >= lower && value <= upper,
        }
    }

    pub fn at_least(name: impl Into<String>, value: f64, lower: f64) -> Self {
        Self::range(name, value, lower, f64::INFINITY)
    }

    pub fn at_most(name: impl Into<String>, value: f64, upper: f64) -> Self {
        Self::range(name, value, f64::NEG_INFINITY, upper)
    }

    pub fn band(name: impl Into<String>, value: f64, band: Band) -> Self {
        Self::range(name, value, band.target - band.tol, band.target + band.tol)
    }
}

#[derive(Clone, Debug, PartialEq)]
pub enum Artifact {
    Traces(Vec<TimeTrace>),
    Table(Table),
    Trajectory(Trajectory),
    Json(Value),
}

/// Written as `<experiment>_<channel>.csv` (or `.json`).
#[derive(Clone, Debug, PartialEq)]
pub struct OutputFile {
    pub channel: String,
    pub artifact: Artifact,
}

impl OutputFile {
    fn new(channel: &str, artifact: Artifact) -> Self {
        Self {
            channel: channel.to_string(),
            artifact,
        }
    }

    pub fn file_name(&self, experiment: ExperimentName) -> String {
        let ext = match self.artifact {
            Artifact::Json(_) => "json",
            _ => "csv",
        };
        format!("{experiment}_{}.{ext}", self.channel)
    }

    pub fn render(&self) -> Result<String> {
        match &self.artifact {
            Artifact::Traces(t) => export::traces_to_csv_string(t),
            Artifact::Table(t) => export::to_csv_string(|b| export::write_table_csv(b, t)),
            Artifact::Trajectory(t) => export::to_csv_string(|b| export::write_trajectory_csv(b, t)),
            Artifact::Json(v) => export::to_json_pretty(v),
        }
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentOutput {
    pub experiment: ExperimentName,
    pub files: Vec<OutputFile>,
    /// Experiment-specific results; checks and bookkeeping are added by
    /// [`summary_json`](Self::summary_json).
    pub results: Value,
    pub checks: Vec<Check>,
    /// Invariant violations summed over every simulated output step.
    pub physicality_violations: usize,
}

impl ExperimentOutput {
    pub fn passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn failed_checks(&self) -> Vec<&Check> {
        self.checks.iter().filter(|c| !c.passed).collect()
    }

    pub fn status_line(&self) -> String {
        let n = self.checks.len();
        let failed = self.failed_checks();
        if failed.is_empty() {
            format!("{}: PASS ({n}/{n} checks)", self.experiment)
        } else {
            let names: Vec<&str> = failed.iter().map(|c| c.name.as_str()).collect();
            format!(
                "{}: FAIL ({}/{n} checks; failed: {})",
                self.experiment,
                n - failed.len(),
                names.join(", ")
            )
        }
    }

    pub fn summary_json(&self, cfg: &ExperimentConfig) -> Value {
        json!({
            "experiment": self.experiment.as_str(),
            "seed": cfg.seed,
            "passed": self.passed(),
            "physicality_violations": self.physicality_violations,
            "results": self.results,
            "checks": self.checks,
        })
    }

    /// Write every artifact plus `<experiment>_summary.json` into `dir`.
    pub fn write_to(&self, dir: &Path, cfg: &ExperimentConfig) -> Result<Vec<PathBuf>> {
        std::fs::create_dir_all(dir)?;
        let mut written = Vec::with_capacity(self.files.len() + 1);
        for f in &self.files {
            let path = dir.join(f.file_name(self.experiment));
            std::fs::write(&path, f.render()?)?;
            written.push(path);
        }
        let path = dir.join(format!("{}_summary.json", self.experiment));
        std::fs::write(&path, export::to_json_pretty(&self.summary_json(cfg))?)?;
        written.push(path);
        Ok(written)
    }
}

/// Run `cfg.experiment`.
pub fn run_experiment(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentOutput> {
    cfg.validate()?;
    let mut out = match cfg.experiment {
        ExperimentName::Fig1d => fig1d(cfg, exec),
        ExperimentName::Fig2 => fig2(cfg, exec),
        ExperimentName::Fig3b => fig3b(cfg, exec),
        ExperimentName::Fig3cf => fig3cf(cfg, exec),
        ExperimentName::Fig4 => fig4(cfg, exec),
        ExperimentName::Sweep => sweep(cfg, exec),
    }?;
    out.checks.push(Check::at_most(
        "physicality_violations",
        out.physicality_violations as f64,
        0.0,
    ));
    Ok(out)
}

fn simulate(cfg: &ExperimentConfig, psi: &Polarization, pulse: &PulseProfile, noise: &NoiseChannels) -> Result<Trajectory> {
    Propagator::with_step(cfg.simulation.integrator_step).propagate(
        &encode_exciton(psi)?,
        pulse,
        &cfg.device,
        noise,
        &cfg.time_grid(),
    )
}

/// Equal superposition of the two eigenstates at `field`.
pub fn eigen_superposition(params: &DeviceParams, field: f64) -> Polarization {
    let (u, l) = params.eigenbasis(field);
    QubitState::from_vector(&((u + l).unscale(std::f64::consts::SQRT_2)))
}

/// Field below F0 at which the splitting equals `s`.
pub fn field_for_splitting(params: &DeviceParams, s: f64) -> Result<f64> {
    if !(s > params.s0) {
        return Err(Error::invalid("splitting", format!("must exceed s0 = {}", params.s0)));
    }
    Ok(params.f0 - (s * s - params.s0 * params.s0).sqrt() / params.gradient_k.abs())
}

/// Pulse amplitude sign that moves the field away from F0 at `baseline`.
fn away_sign(params: &DeviceParams, baseline: f64) -> f64 {
    if baseline < params.f0 {
        -1.0
    } else {
        1.0
    }
}

fn with_ringing(cfg: &ExperimentConfig, pulse: PulseProfile) -> PulseProfile {
    match cfg.pulse.ringing {
        Some(r) => pulse.with_ringing(r),
        None => pulse,
    }
}

fn gate_setup(cfg: &ExperimentConfig, noise: NoiseChannels, measure: bool) -> GateSetup {
    GateSetup {
        params: cfg.device,
        noise,
        det: cfg.detection,
        t_grid: cfg.time_grid(),
        seed: cfg.seed,
        measure,
        step: cfg.simulation.integrator_step,
    }
}

fn splitting_json(f: &SplittingFit) -> Value {
    json!({
        "splitting": f.splitting,
        "stderr": f.stderr,
        "period": f.period,
        "dephasing_rate": f.fit.dephasing_rate,
        "periods_in_window": f.fit.periods,
    })
}

fn fig1d(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentOutput> {
    let params = &cfg.device;
    let noise = cfg.noise()?;
    let runs = exec.try_map(&cfg.fig1d.splittings, |i, &s| {
        let field = field_for_splitting(params, s)?;
        let psi = eigen_superposition(params, field);
        let traj = simulate(cfg, &psi, &PulseProfile::constant(field), &noise)?;
        let trace = detect(&traj, &psi, params, &cfg.detection, derive_seed(cfg.seed, i as u64))?
            .renamed(format!("I_s{s}"));
        let fit = fit_splitting(&trace.window(cfg.fig1d.fit_start, f64::INFINITY))?;
        Ok((s, field, trace, fit, traj.violation_count()))
    })?;

    let mut checks = Vec::new();
    let mut points = Vec::new();
    let mut traces = Vec::new();
    let mut violations = 0;
    for (s, field, trace, fit, v) in runs {
        let model_period = std::f64::consts::TAU * HBAR / s;
        let rel = (fit.period - model_period).abs() / model_period;
        checks.push(Check::at_most(format!("period_rel_err_s{s}"), rel, cfg.acceptance.period_rel_tol));
        points.push(json!({
            "target_splitting": s,
            "field": field,
            "model_period": model_period,
            "period_rel_err": rel,
            "fit": splitting_json(&fit),
        }));
        traces.push(trace);
        violations += v;
    }
    Ok(ExperimentOutput {
        experiment: ExperimentName::Fig1d,
        files: vec![OutputFile::new("traces", Artifact::Traces(traces))],
        results: json!({ "points": points }),
        checks,
        physicality_violations: violations,
    })
}

const FIG2_INPUTS: [&str; 6] = ["H", "V", "D", "A", "R", "L"];

fn fig2(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentOutput> {
    let params = &cfg.device;
    let noise = cfg.noise()?;
    let field = cfg.pulse.baseline_field;
    let pulse = PulseProfile::constant(field);
    let (u, _) = params.eigenbasis(field);
    let eigen_u = QubitState::from_vector(&u);
    let fit_start = cfg.fig1d.fit_start;

    let runs = exec.try_map(&FIG2_INPUTS, |i, name| {
        let psi = QubitState::named(name).expect("named state");
        let traj = simulate(cfg, &psi, &pulse, &noise)?;
        let model = interface_fidelity(&traj, &psi)?;
        let measured = measured_interface_fidelity(&traj, &psi, params, &cfg.detection, derive_seed(cfg.seed, i as u64))?
            .renamed(format!("f_in_{name}"));
        Ok((psi, traj, model, measured))
    })?;

    let mut fid_traces = Vec::new();
    let mut inputs = Vec::new();
    let mut checks = Vec::new();
    let mut violations = 0;
    let mut d_traj = None;
    for (name, (psi, traj, model, measured)) in FIG2_INPUTS.iter().zip(runs) {
        violations += traj.violation_count();
        let model_trace = TimeTrace::from_centers(
            format!("f_in_model_{name}"),
            &traj.times,
            model,
            cfg.detection.time_bin,
        )?;
        let eigen_overlap = eigen_u.overlap(&psi).max(1.0 - eigen_u.overlap(&psi));
        let (t, y): (Vec<f64>, Vec<f64>) = measured.window(fit_start, f64::INFINITY).points().unzip();
        let entry = if eigen_overlap > 0.99 {
            let (b, tau, tau_err) = fit_exponential(&t, &y, 0.5)?;
            let f0 = 0.5 + b;
            checks.push(Check::band(format!("eigen_f_in0_{name}"), f0, cfg.acceptance.eigen_f_in0));
            checks.push(Check::band(format!("eigen_decay_time_{name}"), tau, cfg.acceptance.eigen_decay_time));
            json!({ "input": name, "kind": "eigenstate", "f_in0": f0, "decay_time": tau, "decay_time_stderr": tau_err })
        } else {
            let fit = crate::fit::fit_damped_cosine(&t, &y, None, Some(0.0))?;
            let f0 = fit.upper_envelope(0.0);
            let env = 1.0 / fit.dephasing_rate;
            if *name == "D" {
                checks.push(Check::band("superposition_f_in0_D", f0, cfg.acceptance.superposition_f_in0));
                checks.push(Check::band("envelope_time_D", env, cfg.acceptance.envelope_time));
            }
            json!({
                "input": name,
                "kind": "superposition",
                "f_in0": f0,
                "envelope_time": env,
                "splitting": HBAR * fit.omega,
            })
        };
        inputs.push(entry);
        fid_traces.push(measured);
        fid_traces.push(model_trace);
        if *name == "D" {
            d_traj = Some(traj);
        }
    }
    let d_traj = d_traj.expect("D is among the inputs");
    let basis = ThreeBasisTraces::measure(&d_traj, params, &cfg.detection, derive_seed(cfg.seed, 100))?;
    let mut basis_traces: Vec<TimeTrace> = basis.traces.to_vec();
    basis_traces.extend(basis.normalized()?);

    Ok(ExperimentOutput {
        experiment: ExperimentName::Fig2,
        files: vec![
            OutputFile::new("fidelity", Artifact::Traces(fid_traces)),
            OutputFile::new("basis", Artifact::Traces(basis_traces)),
            OutputFile::new("trajectory", Artifact::Trajectory(d_traj)),
        ],
        results: json!({
            "field": field,
            "splitting": params.splitting(field),
            "eigenbasis_angle_deg": params.eigenbasis_angle(field),
            "inputs": inputs,
        }),
        checks,
        physicality_violations: violations,
    })
}

fn fig3b(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentOutput> {
    let params = &cfg.device;
    let noise = cfg.noise()?;
    let base = cfg.pulse.baseline_field;
    let s_base = params.splitting(base);
    let center = cfg.gate.extraction_center;
    let fwhm = cfg.gate.fwhm;
    let sign = away_sign(params, base);
    let t_end = cfg.simulation.t_max;
    let psi = QubitState::d();

    let mut pulses: Vec<PulseProfile> = cfg
        .fig3b
        .amplitudes
        .iter()
        .map(|a| with_ringing(cfg, PulseProfile::single(base, sign * a.abs(), center, fwhm)))
        .collect();
    let pi_pulse = with_ringing(cfg, calibrate_pulse(std::f64::consts::PI, fwhm, base, center, params)?);
    pulses.push(pi_pulse.clone());

    let runs = exec.try_map(&pulses, |i, pulse| {
        let traj = simulate(cfg, &psi, pulse, &noise)?;
        let trace = measured_interface_fidelity(&traj, &psi, params, &cfg.detection, derive_seed(cfg.seed, i as u64))?;
        let model = excess_phase(pulse, params, t_end)?;
        let ex = extract_phase(&trace, s_base, center, phase_guard(pulse, fwhm, &cfg.detection), Some(model))?;
        let amp = pulse.pulses[0].amplitude;
        let peak = params.splitting(base + amp);
        Ok((amp, peak, model, ex.phase, trace, traj.violation_count()))
    })?;

    let n = cfg.fig3b.amplitudes.len();
    let mut table = Table::new(&["amplitude", "peak_splitting", "model_phase", "extracted_phase"]);
    let mut traces = Vec::new();
    let mut violations = 0;
    for (k, (amp, peak, model, phase, trace, v)) in runs.iter().enumerate() {
        violations += v;
        if k < n {
            table.push(vec![amp.abs(), *peak, *model, *phase]);
            traces.push(trace.clone().renamed(format!("D_norm_A{}", amp.abs())));
        }
    }
    let amps = table.column("amplitude").expect("column");
    let phases = table.column("extracted_phase").expect("column");
    let line = linear_fit(&amps, &phases)?;
    let monotone = phases.windows(2).all(|w| w[1] > w[0]);
    let (pi_amp, _, pi_model, pi_phase, _, _) = runs[n];

    let checks = vec![
        Check::at_least("phase_linearity_r2", line.r_squared, cfg.acceptance.phase_linearity_r2),
        Check::range(
            "pi_pulse_extracted_phase",
            pi_phase,
            std::f64::consts::PI - cfg.acceptance.pi_phase_tol,
            std::f64::consts::PI + cfg.acceptance.pi_phase_tol,
        ),
    ];
    Ok(ExperimentOutput {
        experiment: ExperimentName::Fig3b,
        files: vec![
            OutputFile::new("phase", Artifact::Table(table)),
            OutputFile::new("traces", Artifact::Traces(traces)),
        ],
        results: json!({
            "baseline_field": base,
            "baseline_splitting": s_base,
            "fwhm": fwhm,
            "pulse_center": center,
            "slope": line.slope,
            "slope_stderr": line.slope_stderr,
            "intercept": line.intercept,
            "r_squared": line.r_squared,
            "monotone": monotone,
            "pi_pulse": { "amplitude": pi_amp, "model_phase": pi_model, "extracted_phase": pi_phase },
        }),
        checks,
        physicality_violations: violations,
    })
}

/// Raw D/A counts with and without the gate pulse.
fn gate_intensity(
    cfg: &ExperimentConfig,
    setup: &GateSetup,
    pulse: &PulseProfile,
    psi: &Polarization,
) -> Result<(Vec<TimeTrace>, usize)> {
    let (gated, ungated) = gate_trajectories(setup, pulse, psi)?;
    let mut out = Vec::new();
    for (k, (label, traj)) in [("gated", &gated), ("ungated", &ungated)].into_iter().enumerate() {
        for (j, name) in ["D", "A"].into_iter().enumerate() {
            let p = QubitState::named(name).expect("named state");
            let seed = derive_seed(cfg.seed, 200 + 2 * k as u64 + j as u64);
            out.push(detect(traj, &p, &cfg.device, &cfg.detection, seed)?.renamed(format!("{name}_{label}")));
        }
    }
    Ok((out, gated.violation_count() + ungated.violation_count()))
}

fn gate_json(r: &GateResult) -> Result<Value> {
    Ok(serde_json::to_value(r)?)
}

fn min_max(v: &[f64]) -> (f64, f64) {
    v.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), &x| (lo.min(x), hi.max(x)))
}

fn gate_summary(r: &GateResult) -> Value {
    let (lo, hi) = min_max(&r.fidelity_after(r.post_gate_time));
    let measured = r.measured_fidelity.as_ref().map(|m| {
        let v: Vec<f64> = m.points().filter(|(t, _)| *t >= r.post_gate_time).map(|p| p.1).collect();
        let (a, b) = min_max(&v);
        json!({ "min_after_gate": a, "max_after_gate": b })
    });
    json!({
        "post_gate_time": r.post_gate_time,
        "post_gate_fidelity": r.post_gate_fidelity,
        "min_after_gate": lo,
        "max_after_gate": hi,
        "extracted_phase": r.extracted_phase,
        "clipped_bins": r.clipped_bins,
        "measured": measured,
    })
}

fn fig3cf(cfg: &ExperimentConfig, _exec: Execution) -> Result<ExperimentOutput> {
    let params = &cfg.device;
    let base = cfg.pulse.baseline_field;
    let target = cfg.gate.target_phase;
    let pulse = if cfg.pulse.pulses.is_empty() {
        with_ringing(cfg, calibrate_pulse(target, cfg.gate.fwhm, base, cfg.gate.center(), params)?)
    } else {
        cfg.pulse.clone()
    };
    let psi = QubitState::d();
    let noisy_setup = gate_setup(cfg, cfg.noise()?, true);
    let noisy = run_phase_gate(&noisy_setup, &pulse, &psi, target)?;
    let free_setup = gate_setup(cfg, NoiseChannels::radiative_only(params), false);
    let free = run_phase_gate(&free_setup, &pulse, &psi, target)?;
    let (intensity, violations) = gate_intensity(cfg, &noisy_setup, &pulse, &psi)?;

    let (lo, hi) = min_max(&noisy.fidelity_after(noisy.post_gate_time));
    let checks = vec![
        Check::at_least(
            "pi_gate_noise_free_post_gate",
            free.post_gate_fidelity,
            cfg.acceptance.pi_gate_noise_free_min,
        ),
        Check::at_least("pi_gate_noisy_min_after_gate", lo, cfg.acceptance.pi_gate_noisy_min),
        Check::at_most("pi_gate_noisy_max_after_gate", hi, 1.0),
    ];
    let mut fid = vec![noisy.fidelity_vs_time.clone()];
    fid.extend(noisy.measured_fidelity.clone());
    fid.push(free.fidelity_vs_time.clone().renamed("f_G_noise_free"));
    Ok(ExperimentOutput {
        experiment: ExperimentName::Fig3cf,
        files: vec![
            OutputFile::new("intensity", Artifact::Traces(intensity)),
            OutputFile::new("fidelity", Artifact::Traces(fid)),
            OutputFile::new("gate", Artifact::Json(gate_json(&noisy)?)),
        ],
        results: json!({
            "target_phase": target,
            "pulse": pulse,
            "baseline_splitting": params.splitting(base),
            "peak_splitting": params.splitting(pulse.field_at(cfg.gate.center())),
            "noisy": gate_summary(&noisy),
            "noise_free": gate_summary(&free),
        }),
        checks,
        physicality_violations: violations,
    })
}

fn fig4(cfg: &ExperimentConfig, _exec: Execution) -> Result<ExperimentOutput> {
    let params = &cfg.device;
    let pulse = with_ringing(
        cfg,
        calibrate_spin_flip(cfg.gate.fwhm, cfg.gate.center(), cfg.pulse.baseline_field, params)?,
    );
    let noisy_setup = gate_setup(cfg, cfg.noise()?, true);
    let noisy = run_spin_flip(&noisy_setup, &pulse)?;
    let free_setup = gate_setup(cfg, NoiseChannels::radiative_only(params), false);
    let free = run_spin_flip(&free_setup, &pulse)?;
    let (intensity, violations) = gate_intensity(cfg, &noisy_setup, &pulse, &QubitState::d())?;

    let checks = vec![
        Check::at_least(
            "spin_flip_noise_free_post_gate",
            free.post_gate_fidelity,
            cfg.acceptance.spin_flip_noise_free_min,
        ),
        Check::band("spin_flip_noisy_post_gate", noisy.post_gate_fidelity, cfg.acceptance.spin_flip_noisy),
    ];
    let mut fid = vec![noisy.fidelity_vs_time.clone()];
    fid.extend(noisy.measured_fidelity.clone());
    fid.push(free.fidelity_vs_time.clone().renamed("f_G_noise_free"));
    Ok(ExperimentOutput {
        experiment: ExperimentName::Fig4,
        files: vec![
            OutputFile::new("intensity", Artifact::Traces(intensity)),
            OutputFile::new("fidelity", Artifact::Traces(fid)),
            OutputFile::new("gate", Artifact::Json(gate_json(&noisy)?)),
        ],
        results: json!({
            "pulse": pulse,
            "peak_splitting": params.splitting(pulse.field_at(cfg.gate.center())),
            "noisy": gate_summary(&noisy),
            "noise_free": gate_summary(&free),
        }),
        checks,
        physicality_violations: violations,
    })
}

fn sweep(cfg: &ExperimentConfig, exec: Execution) -> Result<ExperimentOutput> {
    let params = &cfg.device;
    let noise = cfg.noise()?;
    let fields = cfg.sweep.fields();
    let runs = exec.try_map(&fields, |i, &field| {
        let psi = eigen_superposition(params, field);
        let traj = simulate(cfg, &psi, &PulseProfile::constant(field), &noise)?;
        let trace = detect(&traj, &psi, params, &cfg.detection, derive_seed(cfg.seed, i as u64))?;
        let fit = match fit_splitting(&trace.window(cfg.fig1d.fit_start, f64::INFINITY)) {
            Ok(f) => Some(f),
            Err(Error::InsufficientPeriods { .. }) | Err(Error::FitFailed(_)) => None,
            Err(e) => return Err(e),
        };
        Ok((fit, traj.violation_count()))
    })?;

    let mut table = Table::new(&[
        "field",
        "model_splitting",
        "eigenbasis_angle_deg",
        "fitted_splitting",
        "stderr",
        "accepted",
    ]);
    let mut worst = 0.0f64;
    let mut accepted = 0usize;
    let mut violations = 0;
    for (&field, (fit, v)) in fields.iter().zip(&runs) {
        violations += v;
        let s = params.splitting(field);
        let (fs, err, ok) = match fit {
            Some(f) => {
                accepted += 1;
                worst = worst.max((f.splitting - s).abs() / s);
                (f.splitting, f.stderr, 1.0)
            }
            None => (f64::NAN, f64::NAN, 0.0),
        };
        table.push(vec![field, s, params.eigenbasis_angle(field), fs, err, ok]);
    }
    let checks = vec![
        Check::at_least("sweep_accepted_points", accepted as f64, 1.0),
        Check::at_most("sweep_max_rel_err", worst, cfg.acceptance.sweep_splitting_rel_tol),
    ];
    Ok(ExperimentOutput {
        experiment: ExperimentName::Sweep,
        files: vec![OutputFile::new("splitting", Artifact::Table(table))],
        results: json!({
            "points": fields.len(),
            "accepted": accepted,
            "max_rel_err": worst,
        }),
        checks,
        physicality_violations: violations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn field_for_splitting_inverts_model() {
        let p = DeviceParams::default();
        for s in [0.5, 5.0, 12.0] {
            let f = field_for_splitting(&p, s).unwrap();
            assert!(f < p.f0);
            assert!((p.splitting(f) - s).abs() < 1e-10);
        }
        assert!(field_for_splitting(&p, 0.3).is_err());
    }

    #[test]
    fn superposition_is_balanced() {
        let p = DeviceParams::default();
        let psi = eigen_superposition(&p, -170.0);
        let (u, _) = p.eigenbasis(-170.0);
        assert!((psi.overlap(&QubitState::from_vector(&u)) - 0.5).abs() < 1e-12);
    }

    #[test]
    fn status_line_lists_failures() {
        let out = ExperimentOutput {
            experiment: ExperimentName::Fig4,
            files: vec![],
            results: Value::Null,
            checks: vec![Check::at_least("a", 1.0, 0.5), Check::at_most("b", 1.0, 0.5)],
            physicality_violations: 0,
        };
        assert_eq!(out.status_line(), "fig4: FAIL (1/2 checks; failed: b)");
    }
}
