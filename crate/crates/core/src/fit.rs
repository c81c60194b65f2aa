//! Least-squares fits used to read physical quantities off detector traces.
//!
//! The oscillation model covers both raw and normalized traces:
//!
//! ```text
//! y(t) = a·e^{−κt}·(1 + v·e^{−γt}·cos(ωt + φ))
//! ```
//!
//! Raw single-analyzer intensities have κ ≈ 1/τ_r; pair-normalized traces
//! have κ = 0 and a ≈ ½.

use levenberg_marquardt::{LeastSquaresProblem, LevenbergMarquardt};
use nalgebra::{DMatrix, DVector, Dyn, Matrix3, Owned, Vector3};
use serde::{Deserialize, Serialize};

use crate::device::HBAR;
use crate::trace::{TimeTrace, TraceKind};
use crate::{Error, Result};

/// Minimum number of visible oscillation periods for a frequency fit.
pub const MIN_PERIODS: f64 = 2.0;

const TAU: f64 = std::f64::consts::TAU;

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct DampedCosineFit {
    pub amplitude: f64,
    /// κ, ns⁻¹
    pub envelope_rate: f64,
    pub visibility: f64,
    /// γ, ns⁻¹
    pub dephasing_rate: f64,
    /// ω, rad/ns
    pub omega: f64,
    pub phase: f64,
    /// One-σ standard error of ω.
    pub omega_stderr: f64,
    pub dephasing_rate_stderr: f64,
    pub reduced_chi2: f64,
    /// Oscillation periods spanned by the fitted points.
    pub periods: f64,
}

impl DampedCosineFit {
    pub fn eval(&self, t: f64) -> f64 {
        self.amplitude
            * (-self.envelope_rate * t).exp()
            * (1.0 + self.visibility * (-self.dephasing_rate * t).exp() * (self.omega * t + self.phase).cos())
    }

    /// Envelope of the oscillation maxima at time `t`.
    pub fn upper_envelope(&self, t: f64) -> f64 {
        self.amplitude * (-self.envelope_rate * t).exp() * (1.0 + self.visibility * (-self.dephasing_rate * t).exp())
    }
}

/// Fitted splitting with its standard error, µeV.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SplittingFit {
    pub splitting: f64,
    pub stderr: f64,
    pub period: f64,
    pub fit: DampedCosineFit,
}

struct OscillationProblem<'a> {
    t: &'a [f64],
    y: &'a [f64],
    w: &'a [f64],
    /// [a, κ, v, γ, ω, φ]
    p: DVector<f64>,
    fixed_kappa: Option<f64>,
}

impl OscillationProblem<'_> {
    fn full(&self) -> [f64; 6] {
        match self.fixed_kappa {
            Some(k) => [self.p[0], k, self.p[1], self.p[2], self.p[3], self.p[4]],
            None => [self.p[0], self.p[1], self.p[2], self.p[3], self.p[4], self.p[5]],
        }
    }
}

impl LeastSquaresProblem<f64, Dyn, Dyn> for OscillationProblem<'_> {
    type ResidualStorage = Owned<f64, Dyn>;
    type JacobianStorage = Owned<f64, Dyn, Dyn>;
    type ParameterStorage = Owned<f64, Dyn>;

    fn set_params(&mut self, x: &DVector<f64>) {
        self.p.copy_from(x);
    }

    fn params(&self) -> DVector<f64> {
        self.p.clone()
    }

    fn residuals(&self) -> Option<DVector<f64>> {
        let [a, k, v, g, om, ph] = self.full();
        Some(DVector::from_iterator(
            self.t.len(),
            self.t.iter().zip(self.y).zip(self.w).map(|((&t, &y), &w)| {
                let m = a * (-k * t).exp() * (1.0 + v * (-g * t).exp() * (om * t + ph).cos());
                w * (m - y)
            }),
        ))
    }

    fn jacobian(&self) -> Option<DMatrix<f64>> {
        let [a, k, v, g, om, ph] = self.full();
        let free = self.p.len();
        let mut j = DMatrix::zeros(self.t.len(), free);
        for (i, (&t, &w)) in self.t.iter().zip(self.w).enumerate() {
            let e = (-k * t).exp();
            let gd = (-g * t).exp();
            let (s, c) = (om * t + ph).sin_cos();
            let m = a * e * (1.0 + v * gd * c);
            let d = [
                e * (1.0 + v * gd * c),
                -t * m,
                a * e * gd * c,
                -t * a * e * v * gd * c,
                -t * a * e * v * gd * s,
                -a * e * v * gd * s,
            ];
            let cols: &[usize] = if self.fixed_kappa.is_some() {
                &[0, 2, 3, 4, 5]
            } else {
                &[0, 1, 2, 3, 4, 5]
            };
            for (col, &k_idx) in cols.iter().enumerate() {
                j[(i, col)] = w * d[k_idx];
            }
        }
        Some(j)
    }
}

/// Linear least squares for `z ≈ α cos ωt + β sin ωt`, returning `(α, β, SSR)`.
fn quadrature_components(t: &[f64], z: &[f64], w: &[f64], omega: f64) -> (f64, f64, f64) {
    let (mut cc, mut ss, mut cs, mut zc, mut zs, mut zz) = (0.0, 0.0, 0.0, 0.0, 0.0, 0.0);
    for ((&ti, &zi), &wi) in t.iter().zip(z).zip(w) {
        let w2 = wi * wi;
        let (s, c) = (omega * ti).sin_cos();
        cc += w2 * c * c;
        ss += w2 * s * s;
        cs += w2 * c * s;
        zc += w2 * zi * c;
        zs += w2 * zi * s;
        zz += w2 * zi * zi;
    }
    let det = cc * ss - cs * cs;
    if det.abs() < 1e-300 {
        return (0.0, 0.0, zz);
    }
    let alpha = (zc * ss - zs * cs) / det;
    let beta = (zs * cc - zc * cs) / det;
    (alpha, beta, zz - alpha * zc - beta * zs)
}

/// Fit the damped-cosine model to `(t, y)` samples.
///
/// `weights` multiply the residuals (use `1/σ_i`); `fixed_envelope_rate`
/// pins κ (e.g. 0 for normalized traces). Fits showing fewer than
/// [`MIN_PERIODS`] oscillations are rejected.
pub fn fit_damped_cosine(
    t: &[f64],
    y: &[f64],
    weights: Option<&[f64]>,
    fixed_envelope_rate: Option<f64>,
) -> Result<DampedCosineFit> {
    if t.len() != y.len() || weights.is_some_and(|w| w.len() != t.len()) {
        return Err(Error::BinMismatch("fit inputs differ in length".into()));
    }
    if t.len() < 8 {
        return Err(Error::FitFailed(format!("{} points are too few", t.len())));
    }
    let ones = vec![1.0; t.len()];
    let w = weights.unwrap_or(&ones);
    let t0 = t[0];
    let span = t[t.len() - 1] - t0;
    // work in shifted time for conditioning; shift back at the end
    let ts: Vec<f64> = t.iter().map(|x| x - t0).collect();

    let kappa0 = match fixed_envelope_rate {
        Some(k) => k,
        // log-linear fit weighted by y (var ln y ≈ 1/y for counts)
        None => {
            let (mut sw, mut sx, mut sl, mut sxx, mut sxl) = (0.0, 0.0, 0.0, 0.0, 0.0);
            for (&x, &v) in ts.iter().zip(y).filter(|(_, v)| **v > 0.0) {
                let l = v.ln();
                sw += v;
                sx += v * x;
                sl += v * l;
                sxx += v * x * x;
                sxl += v * x * l;
            }
            let den = sw * sxx - sx * sx;
            if den > 0.0 {
                -(sw * sxl - sx * sl) / den
            } else {
                0.0
            }
        }
    };
    // flattening scales the noise by e^{κt}; weight it back down
    let wz: Vec<f64> = ts.iter().zip(w).map(|(t, w)| w * (-kappa0 * t).exp()).collect();
    let flat: Vec<f64> = ts.iter().zip(y).map(|(t, v)| v * (kappa0 * t).exp()).collect();
    let sw2: f64 = wz.iter().map(|w| w * w).sum();
    let a0 = flat.iter().zip(&wz).map(|(f, w)| f * w * w).sum::<f64>() / sw2;
    if !(a0 > 0.0) {
        return Err(Error::FitFailed("trace has no positive signal".into()));
    }
    let z: Vec<f64> = flat.iter().map(|v| v / a0 - 1.0).collect();

    // coarse periodogram for the starting frequency
    let min_dt = ts.windows(2).map(|p| p[1] - p[0]).fold(f64::INFINITY, f64::min);
    let omega_hi = std::f64::consts::PI / min_dt;
    let omega_lo = 0.5 * TAU / span;
    let step = TAU / (8.0 * span);
    let mut best = (omega_lo, f64::INFINITY, 0.0, 0.0);
    let mut omega = omega_lo;
    while omega <= omega_hi {
        let (al, be, ssr) = quadrature_components(&ts, &z, &wz, omega);
        if ssr < best.1 {
            best = (omega, ssr, al, be);
        }
        omega += step;
    }
    let found = best.0 * span / TAU;
    if found < MIN_PERIODS {
        return Err(Error::InsufficientPeriods {
            found,
            required: MIN_PERIODS,
        });
    }
    let v0 = best.2.hypot(best.3);
    let phi0 = (-best.3).atan2(best.2);

    let mut p0 = vec![a0];
    if fixed_envelope_rate.is_none() {
        p0.push(kappa0);
    }
    p0.extend([v0, 0.0, best.0, phi0]);
    let problem = OscillationProblem {
        t: &ts,
        y,
        w,
        p: DVector::from_vec(p0),
        fixed_kappa: fixed_envelope_rate,
    };
    let (problem, report) = LevenbergMarquardt::new()
        .with_patience(400)
        .minimize(problem);
    if !report.termination.was_successful() {
        return Err(Error::FitFailed(format!("{:?}", report.termination)));
    }
    let [mut a, k, mut v, g, mut om, mut ph] = problem.full();
    let jac = problem.jacobian().expect("analytic jacobian");
    let res = problem.residuals().expect("analytic residuals");
    let dof = (t.len() - problem.p.len()).max(1) as f64;
    let chi2 = res.norm_squared() / dof;
    let cov = (jac.transpose() * &jac)
        .try_inverse()
        .ok_or_else(|| Error::FitFailed("singular normal matrix".into()))?
        * chi2;
    let off = usize::from(fixed_envelope_rate.is_none());
    let omega_stderr = cov[(3 + off, 3 + off)].max(0.0).sqrt();
    let gamma_stderr = cov[(2 + off, 2 + off)].max(0.0).sqrt();

    // canonical signs: ω > 0, v ≥ 0
    if om < 0.0 {
        om = -om;
        ph = -ph;
    }
    if v < 0.0 {
        v = -v;
        ph += std::f64::consts::PI;
    }
    // undo the time shift: a·e^{−κ(t−t0)} = (a e^{κt0})·e^{−κt}, similarly for γ and φ
    a *= (k * t0).exp();
    v *= (g * t0).exp();
    ph -= om * t0;
    let periods = om * span / TAU;
    if periods < MIN_PERIODS {
        return Err(Error::InsufficientPeriods {
            found: periods,
            required: MIN_PERIODS,
        });
    }
    Ok(DampedCosineFit {
        amplitude: a,
        envelope_rate: k,
        visibility: v,
        dephasing_rate: g,
        omega: om,
        phase: wrap_phase(ph),
        omega_stderr,
        dephasing_rate_stderr: gamma_stderr,
        reduced_chi2: chi2,
        periods,
    })
}

/// Fitted splitting `ħω` of an oscillating trace.
///
/// Count traces are weighted by Poisson variance; normalized traces (those
/// produced by pair normalization) are fitted with a flat envelope.
pub fn fit_splitting(trace: &TimeTrace) -> Result<SplittingFit> {
    let (t, y): (Vec<f64>, Vec<f64>) = trace.points().unzip();
    let weights: Option<Vec<f64>> = (trace.kind == TraceKind::Counts)
        .then(|| y.iter().map(|&c| 1.0 / c.max(1.0).sqrt()).collect());
    let fixed = trace.channel.ends_with("_norm").then_some(0.0);
    let fit = fit_damped_cosine(&t, &y, weights.as_deref(), fixed)?;
    Ok(SplittingFit {
        splitting: HBAR * fit.omega,
        stderr: HBAR * fit.omega_stderr,
        period: TAU / fit.omega,
        fit,
    })
}

/// Fixed-frequency fit of `c + V·cos(ωt + φ)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct PhaseFit {
    pub offset: f64,
    pub visibility: f64,
    pub phase: f64,
}

/// Linear least squares for offset, visibility and phase at known `omega`.
pub fn fit_phase(t: &[f64], y: &[f64], omega: f64) -> Result<PhaseFit> {
    if t.len() != y.len() {
        return Err(Error::BinMismatch("fit inputs differ in length".into()));
    }
    if t.len() < 3 {
        return Err(Error::FitFailed("phase fit needs at least 3 points".into()));
    }
    let mut ata = Matrix3::<f64>::zeros();
    let mut aty = Vector3::<f64>::zeros();
    for (&ti, &yi) in t.iter().zip(y) {
        let (s, c) = (omega * ti).sin_cos();
        let row = Vector3::new(1.0, c, s);
        ata += row * row.transpose();
        aty += row * yi;
    }
    let x = ata
        .lu()
        .solve(&aty)
        .ok_or_else(|| Error::FitFailed("degenerate phase fit".into()))?;
    // c + α cos ωt + β sin ωt = c + V cos(ωt + φ) with α = V cos φ, β = −V sin φ
    Ok(PhaseFit {
        offset: x[0],
        visibility: x[1].hypot(x[2]),
        phase: (-x[2]).atan2(x[1]),
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct LinearFit {
    pub slope: f64,
    pub intercept: f64,
    pub r_squared: f64,
    pub slope_stderr: f64,
}

/// Ordinary least-squares line.
pub fn linear_fit(x: &[f64], y: &[f64]) -> Result<LinearFit> {
    let n = x.len();
    if n != y.len() {
        return Err(Error::BinMismatch("fit inputs differ in length".into()));
    }
    if n < 2 {
        return Err(Error::FitFailed("line fit needs at least 2 points".into()));
    }
    let nf = n as f64;
    let mx = x.iter().sum::<f64>() / nf;
    let my = y.iter().sum::<f64>() / nf;
    let sxx: f64 = x.iter().map(|v| (v - mx).powi(2)).sum();
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let syy: f64 = y.iter().map(|v| (v - my).powi(2)).sum();
    if sxx == 0.0 {
        return Err(Error::FitFailed("all abscissae equal".into()));
    }
    let slope = sxy / sxx;
    let intercept = my - slope * mx;
    let ssr: f64 = x.iter().zip(y).map(|(a, b)| (b - intercept - slope * a).powi(2)).sum();
    let r_squared = if syy == 0.0 { 1.0 } else { 1.0 - ssr / syy };
    let slope_stderr = if n > 2 { (ssr / (nf - 2.0) / sxx).sqrt() } else { 0.0 };
    Ok(LinearFit {
        slope,
        intercept,
        r_squared,
        slope_stderr,
    })
}

/// `y = asymptote + B·e^{−t/τ}` via a line through `ln(y − asymptote)`.
/// Returns `(B, τ, σ_τ)`.
pub fn fit_exponential(t: &[f64], y: &[f64], asymptote: f64) -> Result<(f64, f64, f64)> {
    let (x, l): (Vec<f64>, Vec<f64>) = t
        .iter()
        .zip(y)
        .filter(|(_, v)| **v > asymptote)
        .map(|(a, b)| (*a, (b - asymptote).ln()))
        .unzip();
    let f = linear_fit(&x, &l)?;
    if !(f.slope < 0.0) {
        return Err(Error::FitFailed(format!("no decay (slope {})", f.slope)));
    }
    let tau = -1.0 / f.slope;
    Ok((f.intercept.exp(), tau, tau * tau * f.slope_stderr))
}

/// Wrap to (−π, π].
pub fn wrap_phase(x: f64) -> f64 {
    let pi = std::f64::consts::PI;
    let r = (x + pi).rem_euclid(TAU) - pi;
    if r <= -pi {
        r + TAU
    } else {
        r
    }
}
