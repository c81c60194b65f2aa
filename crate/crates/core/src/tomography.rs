//! Three-basis polarization tomography on time-resolved traces.
//!
//! With pair-normalized populations `n_H`, `n_D`, `n_R`, the Stokes/Bloch
//! components are `S1 = 2n_H − 1`, `S2 = 2n_D − 1`, `S3 = 2n_R − 1`.

use nalgebra::Matrix2;
use serde::{Deserialize, Serialize};

use crate::device::DeviceParams;
use crate::dynamics::Trajectory;
use crate::photonics::{derive_seed, detect, normalize_pair, DetectionModel};
use crate::state::{density_from_bloch, Polarization};
use crate::trace::TimeTrace;
use crate::{Result, C64};

/// Analyzer order used for the six raw channels.
pub const CHANNELS: [&str; 6] = ["H", "V", "D", "A", "R", "L"];

/// Raw detector traces for the six analyzers of the three bases.
#[derive(Clone, Debug, PartialEq)]
pub struct ThreeBasisTraces {
    pub traces: [TimeTrace; 6],
}

impl ThreeBasisTraces {
    /// Detect a trajectory through all six analyzers. Each channel draws
    /// Poisson noise from its own seed derived from `seed`.
    pub fn measure(
        traj: &Trajectory,
        params: &DeviceParams,
        det: &DetectionModel,
        seed: u64,
    ) -> Result<Self> {
        let mut out = Vec::with_capacity(6);
        for (k, name) in CHANNELS.iter().enumerate() {
            let p = Polarization::named(name).expect("named basis state");
            out.push(detect(traj, &p, params, det, derive_seed(seed, k as u64))?);
        }
        Ok(Self {
            traces: out.try_into().expect("six channels"),
        })
    }

    pub fn channel(&self, name: &str) -> Option<&TimeTrace> {
        CHANNELS.iter().position(|c| *c == name).map(|i| &self.traces[i])
    }

    /// Normalized `H`, `D`, `R` traces.
    pub fn normalized(&self) -> Result<[TimeTrace; 3]> {
        let t = &self.traces;
        Ok([
            normalize_pair(&t[0], &t[1])?,
            normalize_pair(&t[2], &t[3])?,
            normalize_pair(&t[4], &t[5])?,
        ])
    }

    pub fn reconstruct(&self) -> Result<BlochTrace> {
        let [h, d, r] = self.normalized()?;
        reconstruct(&h, &d, &r)
    }
}

/// Per-bin Bloch vectors; `None` where any basis lacked signal.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlochTrace {
    pub times: Vec<f64>,
    pub vectors: Vec<Option<[f64; 3]>>,
}

impl BlochTrace {
    /// 2×2 polarization density matrix at bin `i`.
    pub fn density(&self, i: usize) -> Option<Matrix2<C64>> {
        self.vectors[i].map(density_from_bloch)
    }

    /// `⟨ψ|ρ|ψ⟩ = ½(1 + b·b_ψ)` per bin.
    pub fn overlap_with(&self, psi: &Polarization) -> Vec<Option<f64>> {
        let r = psi.bloch();
        self.vectors
            .iter()
            .map(|v| v.map(|b| 0.5 * (1.0 + b[0] * r[0] + b[1] * r[1] + b[2] * r[2])))
            .collect()
    }
}

/// Bloch vectors from the normalized `H`, `D` and `R` populations.
pub fn reconstruct(n_h: &TimeTrace, n_d: &TimeTrace, n_r: &TimeTrace) -> Result<BlochTrace> {
    for other in [n_d, n_r] {
        if !n_h.same_bins(other) {
            return Err(crate::Error::BinMismatch(format!(
                "`{}` and `{}` have different binning",
                n_h.channel, other.channel
            )));
        }
    }
    let vectors = (0..n_h.len())
        .map(|i| {
            Some([
                2.0 * n_h.get(i)? - 1.0,
                2.0 * n_d.get(i)? - 1.0,
                2.0 * n_r.get(i)? - 1.0,
            ])
        })
        .collect();
    Ok(BlochTrace {
        times: n_h.centers(),
        vectors,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dynamics::{build_noise, propagate, uniform_grid, NoiseChannels};
    use crate::photonics::encode_exciton;
    use crate::pulse::PulseProfile;
    use crate::state::{bloch_of, QubitState};
    use rand::SeedableRng;

    #[test]
    fn noiseless_round_trip_follows_state() {
        let params = DeviceParams::default();
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(3);
        for _ in 0..10 {
            let psi = QubitState::random(&mut rng);
            let traj = propagate(
                &encode_exciton(&psi).unwrap(),
                &PulseProfile::constant(-170.0),
                &params,
                &build_noise(&params).unwrap(),
                &uniform_grid(0.0, 2.0, 0.025),
            )
            .unwrap();
            let m = ThreeBasisTraces::measure(&traj, &params, &DetectionModel::ideal(), 0).unwrap();
            let b = m.reconstruct().unwrap();
            let cond = traj.conditional_states().unwrap();
            for (i, c) in cond.iter().enumerate() {
                let want = bloch_of(c);
                let got = b.vectors[i].unwrap();
                for k in 0..3 {
                    assert!((got[k] - want[k]).abs() < 1e-10);
                }
            }
            let f0 = b.overlap_with(&psi)[0].unwrap();
            assert!((f0 - 1.0).abs() < 1e-12);
        }
    }

    #[test]
    fn empty_bins_are_invalid() {
        let params = DeviceParams::default();
        let traj = propagate(
            &crate::state::ExcitonDensityMatrix::ground(),
            &PulseProfile::constant(-175.0),
            &params,
            &NoiseChannels::radiative_only(&params),
            &uniform_grid(0.0, 0.1, 0.025),
        )
        .unwrap();
        let b = ThreeBasisTraces::measure(&traj, &params, &DetectionModel::ideal(), 0)
            .unwrap()
            .reconstruct()
            .unwrap();
        assert!(b.vectors.iter().all(Option::is_none));
    }
}
