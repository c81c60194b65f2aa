//! Field-dependent exciton spin Hamiltonian.
//!
//! The bright-exciton doublet is modelled as a constant-coupling anticrossing
//! in the lab linear basis {|H⟩, |V⟩}:
//!
//! ```text
//! H(F) = ½ [[δ(F), s0], [s0, −δ(F)]],   δ(F) = k·(F − F0)
//! ```
//!
//! so the splitting is `sqrt(δ² + s0²)` and the upper eigenstate is oriented
//! at `χ = ½·atan2(s0, δ)` from H. Sign convention: δ > 0 for F > F0, where
//! the upper eigenstate is H-like; below F0 the upper eigenstate is V-like.
//! Only |s| is observable in emission, so the opposite convention gives
//! identical traces.

use nalgebra::{Matrix2, Vector2};
use serde::{Deserialize, Serialize};

use crate::{Error, Result, C64};

/// Reduced Planck constant in µeV·ns.
pub const HBAR: f64 = 0.658_211_956_9;

/// Physical constants of the dot and diode.
///
/// Keys serialize with the symbol-style names used in config files
/// (`gradient_k`, `F0`, `s0`, `V_bi`, `d`, `tau_r`, `T_cross`, `T_spin`).
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    /// Slope of the detuning, µeV per kV/cm.
    pub gradient_k: f64,
    /// Anticrossing field, kV/cm.
    #[serde(rename = "F0")]
    pub f0: f64,
    /// Minimum splitting at the anticrossing, µeV.
    pub s0: f64,
    /// Built-in potential, V.
    #[serde(rename = "V_bi")]
    pub v_bi: f64,
    /// Intrinsic region thickness, nm.
    pub d: f64,
    /// Radiative lifetime, ns.
    pub tau_r: f64,
    /// Cross-dephasing time, ns.
    #[serde(rename = "T_cross")]
    pub t_cross: f64,
    /// Spin-scattering time, ns. `f64::INFINITY` disables spin flips.
    #[serde(rename = "T_spin")]
    pub t_spin: f64,
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self {
            gradient_k: 0.26,
            f0: -155.4,
            s0: 0.4,
            v_bi: 2.2,
            d: 140.0,
            tau_r: 1.28,
            t_cross: 3.0,
            t_spin: 78.0,
        }
    }
}

impl DeviceParams {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("s0", self.s0),
            ("tau_r", self.tau_r),
            ("T_cross", self.t_cross),
            ("T_spin", self.t_spin),
            ("d", self.d),
        ];
        for (name, value) in positive {
            if !(value > 0.0) {
                return Err(Error::invalid(name, format!("must be > 0, got {value}")));
            }
        }
        if self.gradient_k == 0.0 || !self.gradient_k.is_finite() {
            return Err(Error::invalid("gradient_k", "must be finite and non-zero"));
        }
        if !self.f0.is_finite() || !self.v_bi.is_finite() {
            return Err(Error::invalid("F0/V_bi", "must be finite"));
        }
        Ok(())
    }

    /// Vertical field (kV/cm) for an applied bias `v` (V): `(V − V_bi)/d`.
    pub fn bias_to_field(&self, v: f64) -> f64 {
        // 1 V/nm = 1e4 kV/cm
        (v - self.v_bi) / self.d * 1.0e4
    }

    /// Linear detuning δ(F) = k·(F − F0), µeV.
    pub fn detuning(&self, field: f64) -> f64 {
        self.gradient_k * (field - self.f0)
    }

    /// Fine-structure splitting |s|(F) = sqrt(δ² + s0²), µeV.
    pub fn splitting(&self, field: f64) -> f64 {
        self.detuning(field).hypot(self.s0)
    }

    /// Orientation of the upper eigenstate relative to H, radians in (0, π/2).
    pub fn eigenbasis_angle_rad(&self, field: f64) -> f64 {
        0.5 * self.s0.atan2(self.detuning(field))
    }

    /// Orientation of the upper eigenstate relative to H, degrees.
    pub fn eigenbasis_angle(&self, field: f64) -> f64 {
        self.eigenbasis_angle_rad(field).to_degrees()
    }

    pub fn hamiltonian(&self, field: f64) -> SpinHamiltonian {
        let delta = self.detuning(field);
        let m = Matrix2::new(
            C64::new(0.5 * delta, 0.0),
            C64::new(0.5 * self.s0, 0.0),
            C64::new(0.5 * self.s0, 0.0),
            C64::new(-0.5 * delta, 0.0),
        );
        SpinHamiltonian { matrix: m }
    }

    /// Lab-frame amplitudes of the (upper, lower) eigenstates at `field`.
    pub fn eigenbasis(&self, field: f64) -> (Vector2<C64>, Vector2<C64>) {
        eigenvectors_at_angle(self.eigenbasis_angle_rad(field))
    }
}

/// Upper `(cos χ, sin χ)` and lower `(−sin χ, cos χ)` eigenvectors.
pub(crate) fn eigenvectors_at_angle(chi: f64) -> (Vector2<C64>, Vector2<C64>) {
    let (s, c) = chi.sin_cos();
    (
        Vector2::new(C64::new(c, 0.0), C64::new(s, 0.0)),
        Vector2::new(C64::new(-s, 0.0), C64::new(c, 0.0)),
    )
}

/// 2×2 Hermitian, traceless energy matrix (µeV) in the lab {H, V} basis.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpinHamiltonian {
    pub matrix: Matrix2<C64>,
}

impl SpinHamiltonian {
    /// Half the eigenvalue gap, from the Pauli decomposition.
    fn half_gap(&self) -> f64 {
        let z = self.matrix[(0, 0)].re;
        let x = self.matrix[(0, 1)];
        (z * z + x.norm_sqr()).sqrt()
    }

    /// Eigenvalues in descending order (upper, lower).
    pub fn eigenvalues(&self) -> (f64, f64) {
        let g = self.half_gap();
        (g, -g)
    }

    pub fn gap(&self) -> f64 {
        2.0 * self.half_gap()
    }

    /// Orientation (degrees) of the upper eigenvector relative to H.
    pub fn upper_angle(&self) -> f64 {
        let z = self.matrix[(0, 0)].re;
        let x = self.matrix[(0, 1)].re;
        (0.5 * x.atan2(z)).to_degrees()
    }
}
