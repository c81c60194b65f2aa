//! Electrical gate waveforms: a baseline field plus Gaussian pulses, with an
//! optional damped-sinusoid ringing tail after each pulse centre.

use serde::{Deserialize, Serialize};

use crate::{Error, Result};

/// FWHM = `FWHM_PER_SIGMA` · σ for a Gaussian.
pub const FWHM_PER_SIGMA: f64 = 2.354_820_045_030_949;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GaussianPulse {
    /// Peak field excursion, kV/cm (signed).
    pub amplitude: f64,
    /// Time of the peak, ns.
    pub center: f64,
    /// Full width at half maximum, ns.
    pub fwhm: f64,
}

impl GaussianPulse {
    pub fn sigma(&self) -> f64 {
        self.fwhm / FWHM_PER_SIGMA
    }

    pub fn value(&self, t: f64) -> f64 {
        let x = (t - self.center) / self.sigma();
        self.amplitude * (-0.5 * x * x).exp()
    }
}

/// Phenomenological post-pulse ringing.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct Ringing {
    /// Ringing amplitude as a fraction of the pulse amplitude.
    pub fraction: f64,
    /// GHz
    pub frequency: f64,
    /// ns
    pub damping_time: f64,
}

impl Default for Ringing {
    fn default() -> Self {
        Self {
            fraction: 0.15,
            frequency: 2.0,
            damping_time: 0.5,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct PulseProfile {
    /// kV/cm
    pub baseline_field: f64,
    #[serde(default)]
    pub pulses: Vec<GaussianPulse>,
    #[serde(default)]
    pub ringing: Option<Ringing>,
}

impl Default for PulseProfile {
    fn default() -> Self {
        Self::constant(-175.0)
    }
}

impl PulseProfile {
    pub fn constant(baseline_field: f64) -> Self {
        Self {
            baseline_field,
            pulses: Vec::new(),
            ringing: None,
        }
    }

    pub fn single(baseline_field: f64, amplitude: f64, center: f64, fwhm: f64) -> Self {
        Self {
            baseline_field,
            pulses: vec![GaussianPulse {
                amplitude,
                center,
                fwhm,
            }],
            ringing: None,
        }
    }

    pub fn with_ringing(mut self, ringing: Ringing) -> Self {
        self.ringing = Some(ringing);
        self
    }

    /// Same waveform without any pulses.
    pub fn baseline_only(&self) -> Self {
        Self::constant(self.baseline_field)
    }

    pub fn validate(&self) -> Result<()> {
        if !self.baseline_field.is_finite() {
            return Err(Error::invalid("baseline_field", "must be finite"));
        }
        for p in &self.pulses {
            if !(p.fwhm > 0.0) {
                return Err(Error::invalid("fwhm", format!("must be > 0, got {}", p.fwhm)));
            }
            if !p.amplitude.is_finite() || !p.center.is_finite() {
                return Err(Error::invalid("pulse", "amplitude and center must be finite"));
            }
        }
        if let Some(r) = &self.ringing {
            if !(r.damping_time > 0.0) || r.fraction < 0.0 || r.frequency < 0.0 {
                return Err(Error::invalid(
                    "ringing",
                    "damping_time must be > 0, fraction and frequency ≥ 0",
                ));
            }
        }
        Ok(())
    }

    /// F(t) in kV/cm.
    pub fn field_at(&self, t: f64) -> f64 {
        let mut f = self.baseline_field;
        for p in &self.pulses {
            f += p.value(t);
            if let Some(r) = &self.ringing {
                let dt = t - p.center;
                if dt > 0.0 {
                    f += r.fraction
                        * p.amplitude
                        * (-dt / r.damping_time).exp()
                        * (std::f64::consts::TAU * r.frequency * dt).sin();
                }
            }
        }
        f
    }

    /// Times at which the waveform has kinks or peaks (useful quadrature splits).
    pub fn breakpoints(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.pulses.iter().map(|p| p.center).collect();
        v.sort_by(f64::total_cmp);
        v
    }

    /// Interval outside which F(t) equals the baseline to well below 1e-12
    /// relative to the largest amplitude.
    pub fn active_window(&self) -> Option<(f64, f64)> {
        let mut lo = f64::INFINITY;
        let mut hi = f64::NEG_INFINITY;
        for p in &self.pulses {
            // exp(-x²/2) < 1e-16 for |x| > 8.6σ
            let half = 9.0 * p.sigma();
            lo = lo.min(p.center - half);
            let mut end = p.center + half;
            if let Some(r) = &self.ringing {
                end = end.max(p.center + 40.0 * r.damping_time);
            }
            hi = hi.max(end);
        }
        (lo <= hi).then_some((lo, hi))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_relative_eq;

    #[test]
    fn constant_profile() {
        let p = PulseProfile::constant(-175.0);
        for t in [0.0, 1.0, 100.0] {
            assert_eq!(p.field_at(t), -175.0);
        }
        assert!(p.active_window().is_none());
    }

    #[test]
    fn gaussian_peak_and_half_maximum() {
        let p = PulseProfile::single(-175.0, 19.2, 0.5, 0.389);
        assert_relative_eq!(p.field_at(0.5), -175.0 + 19.2, epsilon = 1e-12);
        assert_relative_eq!(p.field_at(0.5 + 0.389 / 2.0), -175.0 + 9.6, epsilon = 1e-9);
        assert_relative_eq!(p.field_at(0.5 - 0.389 / 2.0), -175.0 + 9.6, epsilon = 1e-9);
    }

    #[test]
    fn ringing_stays_under_envelope() {
        let pulse = GaussianPulse {
            amplitude: 19.2,
            center: 0.5,
            fwhm: 0.389,
        };
        let p = PulseProfile {
            baseline_field: -175.0,
            pulses: vec![pulse],
            ringing: Some(Ringing::default()),
        };
        let mut max_excess: f64 = 0.0;
        for i in 1..4000 {
            let t = 0.5 + i as f64 * 0.001;
            let tail = p.field_at(t) - -175.0 - pulse.value(t);
            let bound = 0.15 * 19.2 * (-(t - 0.5) / 0.5).exp();
            assert!(tail.abs() <= bound + 1e-12, "t = {t}: {tail} > {bound}");
            max_excess = max_excess.max(tail.abs() / bound);
        }
        // bound is attained somewhere (sin reaches ±1)
        assert!(max_excess > 0.9);
        // no ringing before the centre
        assert_eq!(p.field_at(0.3), -175.0 + pulse.value(0.3));
    }

    #[test]
    fn validation() {
        assert!(PulseProfile::single(-175.0, 1.0, 0.5, 0.0).validate().is_err());
        assert!(PulseProfile::single(-175.0, 1.0, 0.5, 0.3).validate().is_ok());
    }

    #[test]
    fn toml_shape() {
        let p: PulseProfile = toml::from_str(
            "baseline_field = -175.0\n[[pulses]]\namplitude = -19.3\ncenter = 0.5\nfwhm = 0.389\n[ringing]\nfraction = 0.1\n",
        )
        .unwrap();
        assert_eq!(p.pulses.len(), 1);
        assert_eq!(p.ringing.unwrap().fraction, 0.1);
        assert_eq!(p.ringing.unwrap().frequency, 2.0);
    }
}
