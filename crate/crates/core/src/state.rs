//! Pure polarization/spin states and the three-level exciton density matrix.
//!
//! Circular convention: |R⟩ = (|H⟩ + i|V⟩)/√2, so ⟨R| = (⟨H| − i⟨V|)/√2 and
//! an R-encoded exciton carries coherence ρ_HV = −i/2. Stokes/Bloch components
//! are (S1, S2, S3) = (H−V, D−A, R−L).

use nalgebra::{Matrix2, Matrix3, Vector2};
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::C64;

/// Normalized two-component state in the lab {H, V} basis.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct QubitState {
    pub a_h: C64,
    pub a_v: C64,
}

/// A photon polarization (Jones vector) shares the qubit representation.
pub type Polarization = QubitState;

impl QubitState {
    pub fn new(a_h: C64, a_v: C64) -> Self {
        Self { a_h, a_v }
    }

    /// `cos θ |H⟩ + e^{iφ} sin θ |V⟩`.
    pub fn from_angles(theta: f64, phi: f64) -> Self {
        Self {
            a_h: C64::new(theta.cos(), 0.0),
            a_v: C64::from_polar(theta.sin(), phi),
        }
    }

    /// Pure state with the given Bloch direction (need not be unit length).
    pub fn from_bloch(b: [f64; 3]) -> Self {
        let n = (b[0] * b[0] + b[1] * b[1] + b[2] * b[2]).sqrt();
        let z = (b[0] / n).clamp(-1.0, 1.0);
        let theta = 0.5 * z.acos();
        // a_h a_v* = ½(S2 − i S3) ⇒ arg(a_v) = atan2(S3, S2)
        let phi = b[2].atan2(b[1]);
        Self::from_angles(theta, phi)
    }

    pub fn h() -> Self {
        Self::new(C64::new(1.0, 0.0), C64::new(0.0, 0.0))
    }

    pub fn v() -> Self {
        Self::new(C64::new(0.0, 0.0), C64::new(1.0, 0.0))
    }

    pub fn d() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(C64::new(r, 0.0), C64::new(r, 0.0))
    }

    pub fn a() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(C64::new(r, 0.0), C64::new(-r, 0.0))
    }

    pub fn r() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(C64::new(r, 0.0), C64::new(0.0, r))
    }

    pub fn l() -> Self {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        Self::new(C64::new(r, 0.0), C64::new(0.0, -r))
    }

    /// Look up a named basis state (`H`, `V`, `D`, `A`, `R`, `L`).
    pub fn named(name: &str) -> Option<Self> {
        Some(match name {
            "H" => Self::h(),
            "V" => Self::v(),
            "D" => Self::d(),
            "A" => Self::a(),
            "R" => Self::r(),
            "L" => Self::l(),
            _ => return None,
        })
    }

    /// State orthogonal to `self` (antipodal on the sphere).
    pub fn orthogonal(&self) -> Self {
        Self::new(-self.a_v.conj(), self.a_h.conj())
    }

    pub fn random<R: Rng + ?Sized>(rng: &mut R) -> Self {
        // uniform on the sphere
        let z: f64 = rng.random_range(-1.0..=1.0);
        let phi: f64 = rng.random_range(0.0..std::f64::consts::TAU);
        Self::from_angles(0.5 * z.acos(), phi)
    }

    pub fn norm_sqr(&self) -> f64 {
        self.a_h.norm_sqr() + self.a_v.norm_sqr()
    }

    pub fn is_normalized(&self, tol: f64) -> bool {
        (self.norm_sqr() - 1.0).abs() <= tol
    }

    pub fn as_vector(&self) -> Vector2<C64> {
        Vector2::new(self.a_h, self.a_v)
    }

    pub fn from_vector(v: &Vector2<C64>) -> Self {
        Self::new(v[0], v[1])
    }

    /// ⟨self|other⟩
    pub fn inner(&self, other: &Self) -> C64 {
        self.a_h.conj() * other.a_h + self.a_v.conj() * other.a_v
    }

    pub fn overlap(&self, other: &Self) -> f64 {
        self.inner(other).norm_sqr()
    }

    pub fn density(&self) -> Matrix2<C64> {
        let v = self.as_vector();
        v * v.adjoint()
    }

    pub fn bloch(&self) -> [f64; 3] {
        bloch_of(&self.density())
    }

    /// ⟨self|ρ|self⟩ for a 2×2 operator.
    pub fn expectation(&self, rho: &Matrix2<C64>) -> f64 {
        let v = self.as_vector();
        (v.adjoint() * rho * v)[(0, 0)].re
    }
}

/// Stokes/Bloch vector of a 2×2 density matrix in the {H, V} basis.
pub fn bloch_of(rho: &Matrix2<C64>) -> [f64; 3] {
    let hv = rho[(0, 1)];
    [
        (rho[(0, 0)] - rho[(1, 1)]).re,
        2.0 * hv.re,
        -2.0 * hv.im,
    ]
}

/// Unit-trace 2×2 density matrix with the given Bloch vector.
pub fn density_from_bloch(b: [f64; 3]) -> Matrix2<C64> {
    Matrix2::new(
        C64::new(0.5 * (1.0 + b[0]), 0.0),
        C64::new(0.5 * b[1], -0.5 * b[2]),
        C64::new(0.5 * b[1], 0.5 * b[2]),
        C64::new(0.5 * (1.0 - b[0]), 0.0),
    )
}

/// Tolerances for the physicality check.
pub const HERMITIAN_TOL: f64 = 1e-10;
pub const TRACE_TOL: f64 = 1e-10;
pub const POSITIVITY_TOL: f64 = 1e-10;

/// Which invariant a density matrix broke.
#[derive(Clone, Copy, Debug, PartialEq)]
pub enum Violation {
    NonHermitian(f64),
    Trace(f64),
    NegativeEigenvalue(f64),
    GroundCoherence(f64),
}

/// Density matrix over the ordered basis {|g⟩, |H⟩, |V⟩}.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ExcitonDensityMatrix {
    pub rho: Matrix3<C64>,
}

impl ExcitonDensityMatrix {
    pub fn ground() -> Self {
        let mut rho = Matrix3::zeros();
        rho[(0, 0)] = C64::new(1.0, 0.0);
        Self { rho }
    }

    /// Pure exciton state with the given lab-basis amplitudes.
    pub fn from_exciton(state: &QubitState) -> Self {
        Self::from_exciton_block(&state.density())
    }

    /// Embed a 2×2 exciton block; the remaining weight goes to |g⟩.
    pub fn from_exciton_block(block: &Matrix2<C64>) -> Self {
        let mut rho = Matrix3::zeros();
        rho.fixed_view_mut::<2, 2>(1, 1).copy_from(block);
        rho[(0, 0)] = C64::new(1.0 - block.trace().re, 0.0);
        Self { rho }
    }

    /// Convex combination `w·self + (1−w)·other`.
    pub fn mix(&self, other: &Self, w: f64) -> Self {
        Self {
            rho: self.rho * C64::new(w, 0.0) + other.rho * C64::new(1.0 - w, 0.0),
        }
    }

    pub fn trace(&self) -> f64 {
        self.rho.trace().re
    }

    pub fn exciton_block(&self) -> Matrix2<C64> {
        self.rho.fixed_view::<2, 2>(1, 1).into_owned()
    }

    pub fn exciton_population(&self) -> f64 {
        (self.rho[(1, 1)] + self.rho[(2, 2)]).re
    }

    /// Exciton block renormalized to unit trace, if the population is positive.
    pub fn conditional_exciton(&self) -> Option<Matrix2<C64>> {
        let p = self.exciton_population();
        (p > 0.0 && p.is_finite()).then(|| self.exciton_block() / C64::new(p, 0.0))
    }

    /// Check Hermiticity, unit trace, positivity and absence of g–X coherence.
    pub fn check(&self) -> Result<(), Violation> {
        let herm = (self.rho - self.rho.adjoint()).camax();
        if herm > HERMITIAN_TOL {
            return Err(Violation::NonHermitian(herm));
        }
        let tr = self.rho.trace();
        let terr = (tr - C64::new(1.0, 0.0)).norm();
        if terr > TRACE_TOL {
            return Err(Violation::Trace(terr));
        }
        let gx = self.rho[(0, 1)].norm().max(self.rho[(0, 2)].norm());
        if gx > HERMITIAN_TOL {
            return Err(Violation::GroundCoherence(gx));
        }
        let min = self.min_eigenvalue();
        if min < -POSITIVITY_TOL {
            return Err(Violation::NegativeEigenvalue(min));
        }
        Ok(())
    }

    /// Smallest eigenvalue of the Hermitian part.
    pub fn min_eigenvalue(&self) -> f64 {
        let herm = (self.rho + self.rho.adjoint()) * C64::new(0.5, 0.0);
        // g decouples from the exciton block, so the spectrum is
        // {ρ_gg} ∪ eigenvalues of the 2×2 block, available in closed form.
        let g = herm[(0, 0)].re;
        let a = herm[(1, 1)].re;
        let d = herm[(2, 2)].re;
        let b = herm[(1, 2)].norm();
        let mean = 0.5 * (a + d);
        let rad = (0.25 * (a - d) * (a - d) + b * b).sqrt();
        let block_min = mean - rad;
        if herm[(0, 1)].norm() + herm[(0, 2)].norm() == 0.0 {
            g.min(block_min)
        } else {
            nalgebra::SymmetricEigen::new(herm)
                .eigenvalues
                .iter()
                .copied()
                .fold(f64::INFINITY, f64::min)
        }
    }
}
