//! Simulation and analysis toolkit for an electrically controlled exciton
//! spin qubit in a self-assembled quantum dot.
//!
//! The crate is organised bottom-up:
//!
//! * [`device`] maps diode bias and vertical field onto the two-level spin
//!   Hamiltonian (detuning, splitting, eigenbasis orientation).
//! * [`state`] holds pure polarization/spin states and the three-level
//!   (vacuum + two exciton states) density matrix.
//! * [`pulse`] describes the time-dependent field applied by the gate.
//! * [`dynamics`] propagates the density matrix under radiative decay,
//!   cross-dephasing and spin scattering.
//! * [`photonics`] turns trajectories into polarization-resolved detector
//!   traces, and [`tomography`] inverts three-basis traces into Bloch vectors.
//! * [`gates`] runs phase-shift and spin-flip experiments and evaluates
//!   interface and gate fidelities.
//! * [`experiments`] bundles the figure-level runs used by the CLI.
//!
//! Units throughout: energy in µeV, time in ns, field in kV/cm, bias in V.

// `!(x > 0.0)` is used deliberately so that NaN fails validation.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod config;
pub mod device;
pub mod dynamics;
pub mod error;
pub mod experiments;
pub mod export;
pub mod fit;
pub mod gates;
pub mod parallel;
pub mod photonics;
pub mod pulse;
pub mod quadrature;
pub mod state;
pub mod tomography;
pub mod trace;

pub use device::{DeviceParams, SpinHamiltonian, HBAR};
pub use dynamics::{NoiseChannels, Propagator, Trajectory};
pub use error::{Error, Result};
pub use photonics::DetectionModel;
pub use pulse::{GaussianPulse, PulseProfile, Ringing};
pub use state::{ExcitonDensityMatrix, Polarization, QubitState};
pub use trace::TimeTrace;

/// Complex scalar used for amplitudes and matrix elements.
pub type C64 = num_complex::Complex64;
