//! Experiment configuration: a TOML file of dotted sections
//! (`device.tau_r`, `detection.irf_sigma`, …). Unknown keys are errors.

use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::dynamics::{build_noise, NoiseChannels};
use crate::photonics::DetectionModel;
use crate::pulse::PulseProfile;
use crate::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExperimentName {
    Fig1d,
    Fig2,
    Fig3b,
    Fig3cf,
    Fig4,
    Sweep,
}

impl ExperimentName {
    pub const ALL: [ExperimentName; 6] = [
        ExperimentName::Fig1d,
        ExperimentName::Fig2,
        ExperimentName::Fig3b,
        ExperimentName::Fig3cf,
        ExperimentName::Fig4,
        ExperimentName::Sweep,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            ExperimentName::Fig1d => "fig1d",
            ExperimentName::Fig2 => "fig2",
            ExperimentName::Fig3b => "fig3b",
            ExperimentName::Fig3cf => "fig3cf",
            ExperimentName::Fig4 => "fig4",
            ExperimentName::Sweep => "sweep",
        }
    }
}

impl FromStr for ExperimentName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Self::ALL
            .into_iter()
            .find(|e| e.as_str() == s)
            .ok_or_else(|| Error::UnknownExperiment(s.to_string()))
    }
}

impl std::fmt::Display for ExperimentName {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoiseModel {
    /// Radiative decay, cross-dephasing and spin scattering from the device.
    Full,
    RadiativeOnly,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimulationSettings {
    /// End of the simulated window, ns. Bins follow `detection.time_bin`.
    pub t_max: f64,
    /// Internal RK4 step, ns.
    pub integrator_step: f64,
    pub noise_model: NoiseModel,
}

impl Default for SimulationSettings {
    fn default() -> Self {
        Self {
            t_max: 10.0,
            integrator_step: 1.0e-3,
            noise_model: NoiseModel::Full,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct GateSettings {
    pub fwhm: f64,
    /// Delay from initialization to the rising half-maximum, ns; the pulse
    /// peak sits half a FWHM later.
    pub delay: f64,
    pub target_phase: f64,
    /// Pulse peak used when phases are fitted (needs ≥ 2 periods either side).
    pub extraction_center: f64,
}

impl Default for GateSettings {
    fn default() -> Self {
        Self {
            fwhm: 0.389,
            delay: 0.25,
            target_phase: std::f64::consts::PI,
            extraction_center: 3.5,
        }
    }
}

impl GateSettings {
    pub fn center(&self) -> f64 {
        self.delay + 0.5 * self.fwhm
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig1dSettings {
    /// Splittings (µeV) at which oscillations are recorded, below F0.
    pub splittings: Vec<f64>,
    /// Fits start here to stay clear of the smeared turn-on, ns.
    pub fit_start: f64,
}

impl Default for Fig1dSettings {
    fn default() -> Self {
        Self {
            splittings: vec![5.0, 7.5, 10.0],
            fit_start: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Fig3bSettings {
    /// Pulse amplitudes (kV/cm, magnitude; applied away from F0).
    pub amplitudes: Vec<f64>,
}

impl Default for Fig3bSettings {
    fn default() -> Self {
        Self {
            amplitudes: (1..=8).map(|i| 5.0 * i as f64).collect(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepSettings {
    pub field_start: f64,
    pub field_stop: f64,
    pub points: usize,
}

impl Default for SweepSettings {
    fn default() -> Self {
        Self {
            field_start: -200.0,
            field_stop: -110.0,
            points: 19,
        }
    }
}

impl SweepSettings {
    pub fn fields(&self) -> Vec<f64> {
        match self.points {
            0 => Vec::new(),
            1 => vec![self.field_start],
            n => (0..n)
                .map(|i| self.field_start + (self.field_stop - self.field_start) * i as f64 / (n - 1) as f64)
                .collect(),
        }
    }
}

/// Target value with an absolute tolerance.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Band {
    pub target: f64,
    pub tol: f64,
}

impl Band {
    pub fn contains(&self, x: f64) -> bool {
        (x - self.target).abs() <= self.tol
    }
}

/// Pass/fail thresholds for `--check`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct AcceptanceThresholds {
    pub model_identity_tol: f64,
    pub period_rel_tol: f64,
    pub propagator_overlap_tol: f64,
    pub eigen_f_in0: Band,
    pub eigen_decay_time: Band,
    pub superposition_f_in0: Band,
    pub envelope_time: Band,
    pub phase_linearity_r2: f64,
    pub pi_phase_tol: f64,
    pub pi_gate_noise_free_min: f64,
    pub pi_gate_noisy_min: f64,
    pub spin_flip_noise_free_min: f64,
    pub spin_flip_noisy: Band,
    pub tomography_noiseless_tol: f64,
    pub tomography_poisson_tol: f64,
    pub tomography_counts: f64,
    pub sweep_splitting_rel_tol: f64,
}

impl Default for AcceptanceThresholds {
    fn default() -> Self {
        Self {
            model_identity_tol: 1e-9,
            period_rel_tol: 0.01,
            propagator_overlap_tol: 1e-9,
            eigen_f_in0: Band { target: 0.95, tol: 0.03 },
            eigen_decay_time: Band { target: 78.0, tol: 17.0 },
            superposition_f_in0: Band { target: 0.81, tol: 0.03 },
            envelope_time: Band { target: 3.0, tol: 0.4 },
            phase_linearity_r2: 0.999,
            pi_phase_tol: 0.05,
            pi_gate_noise_free_min: 0.99,
            pi_gate_noisy_min: 0.9,
            spin_flip_noise_free_min: 0.95,
            spin_flip_noisy: Band { target: 0.97, tol: 0.02 },
            tomography_noiseless_tol: 1e-10,
            tomography_poisson_tol: 5e-3,
            tomography_counts: 1.0e6,
            sweep_splitting_rel_tol: 0.01,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: ExperimentName,
    #[serde(default)]
    pub seed: u64,
    #[serde(default = "default_output_dir")]
    pub output_dir: PathBuf,
    /// Worker threads for sweeps: 0 = all cores, 1 = sequential.
    #[serde(default)]
    pub workers: usize,
    #[serde(default)]
    pub device: DeviceParams,
    #[serde(default)]
    pub detection: DetectionModel,
    /// Operating point (`baseline_field`), optional explicit pulses for
    /// fig3cf, and optional ringing applied to every gate pulse.
    #[serde(default)]
    pub pulse: PulseProfile,
    #[serde(default)]
    pub simulation: SimulationSettings,
    #[serde(default)]
    pub gate: GateSettings,
    #[serde(default)]
    pub fig1d: Fig1dSettings,
    #[serde(default)]
    pub fig3b: Fig3bSettings,
    #[serde(default)]
    pub sweep: SweepSettings,
    #[serde(default)]
    pub acceptance: AcceptanceThresholds,
}

fn default_output_dir() -> PathBuf {
    PathBuf::from("out")
}

impl ExperimentConfig {
    /// Default device, detection and analysis settings for `experiment`.
    pub fn defaults(experiment: ExperimentName) -> Self {
        Self {
            experiment,
            seed: 0,
            output_dir: default_output_dir(),
            workers: 0,
            device: DeviceParams::default(),
            detection: DetectionModel::default(),
            pulse: PulseProfile::default(),
            simulation: SimulationSettings::default(),
            gate: GateSettings::default(),
            fig1d: Fig1dSettings::default(),
            fig3b: Fig3bSettings::default(),
            sweep: SweepSettings::default(),
            acceptance: AcceptanceThresholds::default(),
        }
    }

    pub fn from_toml_str(s: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(s).map_err(|e| Error::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text).map_err(|e| match e {
            Error::Config(m) => Error::Config(format!("{}: {m}", path.display())),
            other => other,
        })
    }

    pub fn to_toml_string(&self) -> Result<String> {
        toml::to_string(self).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn validate(&self) -> Result<()> {
        self.device.validate()?;
        self.detection.validate()?;
        self.pulse.validate()?;
        let s = &self.simulation;
        if !(s.t_max > 0.0) || !(s.integrator_step > 0.0) {
            return Err(Error::Config("simulation.t_max and simulation.integrator_step must be > 0".into()));
        }
        if s.t_max / self.detection.time_bin > 1.0e6 {
            return Err(Error::Config("simulation.t_max / detection.time_bin exceeds 1e6 bins".into()));
        }
        if !(self.gate.fwhm > 0.0) || !(self.gate.delay >= 0.0) {
            return Err(Error::Config("gate.fwhm must be > 0 and gate.delay ≥ 0".into()));
        }
        if self.fig1d.splittings.iter().any(|s| !(*s > self.device.s0)) {
            return Err(Error::Config(format!(
                "fig1d.splittings must exceed device.s0 = {}",
                self.device.s0
            )));
        }
        Ok(())
    }

    pub fn noise(&self) -> Result<NoiseChannels> {
        match self.simulation.noise_model {
            NoiseModel::Full => build_noise(&self.device),
            NoiseModel::RadiativeOnly => Ok(NoiseChannels::radiative_only(&self.device)),
        }
    }

    /// Output grid `0, Δt, …, t_max` on the detector bins.
    pub fn time_grid(&self) -> Vec<f64> {
        crate::dynamics::uniform_grid(0.0, self.simulation.t_max, self.detection.time_bin)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn defaults_round_trip_through_toml() {
        let cfg = ExperimentConfig::defaults(ExperimentName::Fig2);
        let text = cfg.to_toml_string().unwrap();
        assert_eq!(ExperimentConfig::from_toml_str(&text).unwrap(), cfg);
    }

    #[test]
    fn dotted_keys_and_device_names() {
        let cfg = ExperimentConfig::from_toml_str(
            "experiment = \"fig1d\"\nseed = 7\ndevice.tau_r = 1.0\ndevice.F0 = -150.0\ndevice.T_spin = 50.0\n",
        )
        .unwrap();
        assert_eq!(cfg.experiment, ExperimentName::Fig1d);
        assert_eq!(cfg.device.tau_r, 1.0);
        assert_eq!(cfg.device.f0, -150.0);
        assert_eq!(cfg.device.t_spin, 50.0);
        assert_eq!(cfg.device.s0, 0.4);
    }

    #[test]
    fn diagnostics_name_line_and_key() {
        let err = ExperimentConfig::from_toml_str("experiment = \"fig2\"\n\n[device]\ntau_rr = 1.0\n").unwrap_err();
        let msg = err.to_string();
        assert!(msg.contains("tau_rr"), "{msg}");
        assert!(msg.contains("line 4"), "{msg}");

        let err = ExperimentConfig::from_toml_str("experiment = \"fig9\"\n").unwrap_err();
        assert!(err.to_string().contains("fig9"));

        let err = ExperimentConfig::from_toml_str("experiment = \"fig2\"\ndevice.tau_r = -1.0\n").unwrap_err();
        assert!(err.to_string().contains("tau_r"));
    }

    #[test]
    fn checked_in_config_matches_defaults() {
        let cfg = ExperimentConfig::from_toml_str(include_str!("../../../configs/default.toml")).unwrap();
        assert_eq!(cfg, ExperimentConfig::defaults(ExperimentName::Fig2));
    }

    #[test]
    fn experiment_names() {
        for e in ExperimentName::ALL {
            assert_eq!(e.as_str().parse::<ExperimentName>().unwrap(), e);
        }
        assert!(matches!("fig5".parse::<ExperimentName>(), Err(Error::UnknownExperiment(_))));
    }
}
