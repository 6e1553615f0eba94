//! Capture, storage and release of single-photon wave packets in the dark
//! state of an atomic ensemble inside an optical cavity.
//!
//! The cavity field couples to the ensemble through a collective coupling
//! `g sqrt(N)` and a classical drive `Omega(t)`; the mixing angle
//! `tan(theta) = g sqrt(N) / Omega` sets how much of the dark state is
//! photonic. Choosing `theta(t)` so that the cavity reflects nothing maps an
//! incoming packet completely onto a collective spin excitation.

pub mod classical;
pub mod control;
pub mod cycle;
pub mod error;
pub mod export;
pub mod full;
pub mod grid;
pub mod model;
pub mod pulses;
pub mod reduced;

pub use control::{
    check_adiabaticity, sech_matched_cos_theta, sech_matched_omega, solve_impedance_matching,
    AdiabaticityReport, ControlSchedule,
};
pub use error::{Error, Result};
pub use grid::TimeGrid;
pub use model::{
    dark_bright_rotate, mixing_angle_from_omega, omega_from_cos_theta, AmplitudeState, MixingAngle,
    SystemParams,
};
pub use pulses::{make_gaussian, make_hyper_gaussian, make_pulse, make_sech, PulseEnvelope, PulseFamily, Waveform};
