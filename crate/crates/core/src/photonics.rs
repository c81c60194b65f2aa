//! Polarization encoding and time-resolved, polarization-analysed detection.
//!
//! Detection chain for one analyzer channel:
//!
//! 1. emission rate `I_p(t) = ⟨E_p⟩ / τ_r` where `E_p = c|p⟩⟨p| + (1−c)·𝟙/2`
//!    is the analyzer with polarization contrast `c`;
//! 2. Stark detection window `η(t) = exp(−(F(t) − F_ref)² / 2σ_F²)`, applied
//!    at emission time;
//! 3. Gaussian timing smear of `σ_t = sqrt(σ_irf² + σ_jitter²)`;
//! 4. optional Poisson counts with mean `photon_budget · I · Δt`.
//!
//! With `photon_budget = N`, a fully decaying exciton yields `N` expected
//! counts summed over the two analyzers of one basis.

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Poisson};
use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::dynamics::Trajectory;
use crate::state::{ExcitonDensityMatrix, Polarization};
use crate::trace::{TimeTrace, TraceKind};
use crate::{Error, Result};

const NORM_TOL: f64 = 1e-9;

/// Detector and excitation-timing model. All σ ≥ 0; a σ of zero disables
/// that stage.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DetectionModel {
    /// APD timing response, ns.
    pub irf_sigma: f64,
    /// Spread of the qubit initialization time, ns.
    pub init_jitter_sigma: f64,
    /// Width of the detection window in field excursion, kV/cm. 0 disables.
    pub stark_window_sigma: f64,
    /// Field at which the window is centred; `None` uses the field of the
    /// first trace bin (the pre-gate baseline).
    pub reference_field: Option<f64>,
    /// Expected detected photons per basis for a fully decaying exciton.
    pub photon_budget: f64,
    pub poisson_enabled: bool,
    /// ns
    pub time_bin: f64,
    /// Analyzer polarization contrast in [0, 1]; 1 is a perfect polarizer.
    pub analyzer_contrast: f64,
}

impl Default for DetectionModel {
    fn default() -> Self {
        Self {
            irf_sigma: 0.105,
            init_jitter_sigma: 0.037,
            stark_window_sigma: 6.0,
            reference_field: None,
            photon_budget: 1.0e5,
            poisson_enabled: false,
            time_bin: 0.025,
            analyzer_contrast: 0.9,
        }
    }
}

impl DetectionModel {
    /// Perfect detector: no smearing, no window, unit contrast, no shot noise.
    pub fn ideal() -> Self {
        Self {
            irf_sigma: 0.0,
            init_jitter_sigma: 0.0,
            stark_window_sigma: 0.0,
            analyzer_contrast: 1.0,
            poisson_enabled: false,
            ..Self::default()
        }
    }

    pub fn timing_sigma(&self) -> f64 {
        self.irf_sigma.hypot(self.init_jitter_sigma)
    }

    pub fn validate(&self) -> Result<()> {
        for (name, v) in [
            ("irf_sigma", self.irf_sigma),
            ("init_jitter_sigma", self.init_jitter_sigma),
            ("stark_window_sigma", self.stark_window_sigma),
            ("photon_budget", self.photon_budget),
        ] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::invalid(name, format!("must be finite and ≥ 0, got {v}")));
            }
        }
        if !(self.time_bin > 0.0) {
            return Err(Error::invalid("time_bin", "must be > 0"));
        }
        if !(0.0..=1.0).contains(&self.analyzer_contrast) {
            return Err(Error::invalid("analyzer_contrast", "must lie in [0, 1]"));
        }
        Ok(())
    }
}

/// Quasi-resonant excitation: photon polarization → exciton spin state.
pub fn encode_exciton(pol_in: &Polarization) -> Result<ExcitonDensityMatrix> {
    if !pol_in.is_normalized(NORM_TOL) {
        return Err(Error::UnnormalizedAnalyzer(pol_in.norm_sqr()));
    }
    Ok(ExcitonDensityMatrix::from_exciton(pol_in))
}

/// Name of a polarization if it equals one of H, V, D, A, R, L.
pub fn polarization_name(p: &Polarization) -> Option<&'static str> {
    ["H", "V", "D", "A", "R", "L"]
        .into_iter()
        .find(|n| Polarization::named(n).is_some_and(|q| q.overlap(p) > 1.0 - 1e-12))
}

fn bin_width_of(traj: &Trajectory) -> Result<f64> {
    match traj.times.len() {
        0 => Err(Error::TimeGrid { index: 0 }),
        1 => Ok(DetectionModel::default().time_bin),
        _ => Ok(traj.times[1] - traj.times[0]),
    }
}

/// Ideal emission-rate trace through a perfect analyzer `p`.
pub fn emission_intensity(
    traj: &Trajectory,
    analyzer: &Polarization,
    params: &DeviceParams,
) -> Result<TimeTrace> {
    emission_intensity_with_contrast(traj, analyzer, params, 1.0)
}

/// Emission-rate trace through an analyzer of polarization contrast `contrast`.
pub fn emission_intensity_with_contrast(
    traj: &Trajectory,
    analyzer: &Polarization,
    params: &DeviceParams,
    contrast: f64,
) -> Result<TimeTrace> {
    if !analyzer.is_normalized(NORM_TOL) {
        return Err(Error::UnnormalizedAnalyzer(analyzer.norm_sqr()));
    }
    let rate = 1.0 / params.tau_r;
    let values = traj
        .states
        .iter()
        .map(|s| {
            let x = s.exciton_block();
            let pop = (x[(0, 0)] + x[(1, 1)]).re;
            let proj = analyzer.expectation(&x);
            rate * (contrast * proj + 0.5 * (1.0 - contrast) * pop).max(0.0)
        })
        .collect();
    let name = polarization_name(analyzer).unwrap_or("analyzer");
    TimeTrace::from_centers(name, &traj.times, values, bin_width_of(traj)?)
}

/// Gaussian kernel on the bin grid, normalized to unit sum.
fn gaussian_kernel(sigma: f64, bin: f64) -> Vec<f64> {
    let half = (6.0 * sigma / bin).ceil() as i64;
    let mut k: Vec<f64> = (-half..=half)
        .map(|m| {
            let x = m as f64 * bin / sigma;
            (-0.5 * x * x).exp()
        })
        .collect();
    let s: f64 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= s);
    k
}

/// Discrete convolution with a centred kernel; signal outside the trace is
/// taken as zero, so kernel weight falling past either edge is lost.
fn convolve_centered(values: &[f64], kernel: &[f64]) -> Vec<f64> {
    let half = (kernel.len() / 2) as i64;
    let n = values.len() as i64;
    (0..n)
        .map(|i| {
            kernel
                .iter()
                .enumerate()
                .filter_map(|(k, w)| {
                    let j = i + half - k as i64;
                    (0..n).contains(&j).then(|| w * values[j as usize])
                })
                .sum()
        })
        .collect()
}

/// Apply the Stark window, timing smear and (optionally) Poisson sampling.
///
/// `fields` gives the field at each bin centre. The RNG is seeded from `seed`
/// only, so results are reproducible bit-for-bit.
pub fn apply_detection(
    trace: &TimeTrace,
    det: &DetectionModel,
    fields: &[f64],
    seed: u64,
) -> Result<TimeTrace> {
    det.validate()?;
    if fields.len() != trace.len() {
        return Err(Error::BinMismatch(format!(
            "{} field samples for {} bins",
            fields.len(),
            trace.len()
        )));
    }
    let mut values = trace.values.clone();

    if det.stark_window_sigma > 0.0 {
        let reference = det.reference_field.or(fields.first().copied()).unwrap_or(0.0);
        let two_var = 2.0 * det.stark_window_sigma * det.stark_window_sigma;
        for (v, f) in values.iter_mut().zip(fields) {
            *v *= (-(f - reference).powi(2) / two_var).exp();
        }
    }

    let sigma = det.timing_sigma();
    if sigma > 0.0 && trace.len() > 1 {
        let bin = trace.bin_width();
        if bin > 0.5 * sigma {
            return Err(Error::Precondition(format!(
                "bin width {bin} ns must be ≤ σ_t/2 = {} ns",
                0.5 * sigma
            )));
        }
        values = convolve_centered(&values, &gaussian_kernel(sigma, bin));
    }

    let mut out = TimeTrace {
        values,
        ..trace.clone()
    };
    if det.poisson_enabled {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let scale = det.photon_budget * trace.bin_width();
        for v in out.values.iter_mut() {
            let mean = *v * scale;
            *v = if mean > 0.0 {
                Poisson::new(mean)
                    .map_err(|e| Error::invalid("photon_budget", e.to_string()))?
                    .sample(&mut rng)
            } else {
                0.0
            };
        }
        out.kind = TraceKind::Counts;
    }
    Ok(out)
}

/// Emission through analyzer `p` followed by the full detection chain.
pub fn detect(
    traj: &Trajectory,
    analyzer: &Polarization,
    params: &DeviceParams,
    det: &DetectionModel,
    seed: u64,
) -> Result<TimeTrace> {
    let ideal = emission_intensity_with_contrast(traj, analyzer, params, det.analyzer_contrast)?;
    apply_detection(&ideal, det, &traj.fields, seed)
}

/// Per-bin `p / (p + p̄)`. Bins with a zero denominator are marked invalid.
pub fn normalize_pair(trace_p: &TimeTrace, trace_pbar: &TimeTrace) -> Result<TimeTrace> {
    if !trace_p.same_bins(trace_pbar) {
        return Err(Error::BinMismatch(format!(
            "`{}` and `{}` have different binning",
            trace_p.channel, trace_pbar.channel
        )));
    }
    let mut values = Vec::with_capacity(trace_p.len());
    let mut valid = Vec::with_capacity(trace_p.len());
    for i in 0..trace_p.len() {
        let (a, b) = (trace_p.values[i], trace_pbar.values[i]);
        let ok = trace_p.valid[i] && trace_pbar.valid[i] && a + b > 0.0;
        values.push(if ok { (a / (a + b)).clamp(0.0, 1.0) } else { 0.0 });
        valid.push(ok);
    }
    Ok(TimeTrace {
        channel: format!("{}_norm", trace_p.channel),
        bin_edges: trace_p.bin_edges.clone(),
        values,
        valid,
        kind: TraceKind::Intensity,
    })
}

/// Mix a base seed with a small tag (splitmix64 finalizer).
pub fn derive_seed(seed: u64, tag: u64) -> u64 {
    let mut z = seed ^ tag.wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}
