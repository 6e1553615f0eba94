//! Adiabatic, Markov-limit dynamics of the dark-state amplitude `D(t)`:
//!
//! ```text
//! dD/dt   = sqrt(gamma) cos(theta) phi_in - (gamma/2) cos^2(theta) D
//! phi_out = phi_in - sqrt(gamma) cos(theta) D
//! ```
//!
//! A spin-coherence decay `gamma_c` adds `(gamma_c/2) sin^2(theta)` to the
//! damping rate.

use std::io::Write;

use num_complex::Complex64;
use rayon::prelude::*;

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::export::sci;
use crate::grid::{cumulative_integral, interval_integral, midpoint, power_law_fit, TimeGrid};
use crate::model::SystemParams;
use crate::pulses::{make_pulse, shift, PulseEnvelope, PulseFamily};

/// Dark-state amplitude and loading output on a common grid.
#[derive(Debug, Clone, PartialEq)]
pub struct ReducedTrajectory {
    pub grid: TimeGrid,
    pub dark: Vec<Complex64>,
    pub phi_in: Vec<Complex64>,
    pub phi_out: Vec<Complex64>,
    pub population: Vec<f64>,
    pub cos_theta: Vec<f64>,
    pub warnings: Vec<String>,
}

impl ReducedTrajectory {
    fn assemble(
        params: &SystemParams,
        schedule: &ControlSchedule,
        pulse: &PulseEnvelope,
        dark: Vec<Complex64>,
        warnings: Vec<String>,
    ) -> Self {
        let sg = params.gamma.sqrt();
        let phi_in = pulse.values().to_vec();
        let phi_out = phi_in
            .iter()
            .zip(&dark)
            .zip(&schedule.cos_theta)
            .map(|((p, d), c)| p - d * (sg * c))
            .collect();
        Self {
            grid: schedule.grid,
            population: dark.iter().map(|d| d.norm_sqr()).collect(),
            dark,
            phi_in,
            phi_out,
            cos_theta: schedule.cos_theta.clone(),
            warnings,
        }
    }

    pub fn final_amplitude(&self) -> Complex64 {
        self.dark[self.dark.len() - 1]
    }

    /// `int |phi_out|^2` over the whole grid.
    pub fn reflected_energy(&self) -> f64 {
        let p: Vec<f64> = self.phi_out.iter().map(|v| v.norm_sqr()).collect();
        *cumulative_integral(&p, self.grid.dt()).last().unwrap()
    }

    /// `|D(t)|^2 + int_{t0}^{t} |phi_out|^2 + int_{t}^{t1} |phi_in|^2` at
    /// every sample; identically one without spin decay.
    pub fn probability_ledger(&self) -> Vec<f64> {
        let dt = self.grid.dt();
        let out: Vec<f64> = self.phi_out.iter().map(|v| v.norm_sqr()).collect();
        let inp: Vec<f64> = self.phi_in.iter().map(|v| v.norm_sqr()).collect();
        let out_c = cumulative_integral(&out, dt);
        let in_c = cumulative_integral(&inp, dt);
        let total_in = in_c[in_c.len() - 1];
        (0..self.population.len())
            .map(|i| self.population[i] + out_c[i] + (total_in - in_c[i]))
            .collect()
    }

    /// Collective spin amplitude `i sin(theta) D`.
    pub fn spin_amplitude(&self) -> Vec<Complex64> {
        self.dark
            .iter()
            .zip(&self.cos_theta)
            .map(|(d, c)| Complex64::i() * d * ((1.0 - c) * (1.0 + c)).sqrt())
            .collect()
    }

    /// Cavity amplitude `-i cos(theta) D`.
    pub fn cavity_amplitude(&self) -> Vec<Complex64> {
        self.dark.iter().zip(&self.cos_theta).map(|(d, c)| -Complex64::i() * d * *c).collect()
    }
}

fn check_inputs(params: &SystemParams, schedule: &ControlSchedule, pulse: &PulseEnvelope) -> Result<()> {
    params.validate()?;
    schedule.grid.ensure_matches(pulse.grid(), "schedule and pulse")
}

fn damping(params: &SystemParams, cos_theta: &[f64]) -> Vec<f64> {
    cos_theta
        .iter()
        .map(|c| 0.5 * params.gamma * c * c + 0.5 * params.gamma_c * (1.0 - c * c))
        .collect()
}

/// Integrates the reduced equation with classical RK4 on the schedule grid,
/// from `D(t_start) = 0`.
pub fn integrate_dark_state(
    params: &SystemParams,
    pulse: &PulseEnvelope,
    schedule: &ControlSchedule,
) -> Result<ReducedTrajectory> {
    check_inputs(params, schedule, pulse)?;
    let dark = rk4_dark(params, schedule, pulse.values(), Complex64::new(0.0, 0.0));
    Ok(ReducedTrajectory::assemble(params, schedule, pulse, dark, Vec::new()))
}

/// RK4 on raw input samples from `D(t_start) = d0`.
pub(crate) fn rk4_dark(
    params: &SystemParams,
    schedule: &ControlSchedule,
    phi_in: &[Complex64],
    d0: Complex64,
) -> Vec<Complex64> {
    let sg = params.gamma.sqrt();
    let dt = schedule.grid.dt();
    let drive: Vec<Complex64> =
        phi_in.iter().zip(&schedule.cos_theta).map(|(p, c)| p * (sg * c)).collect();
    let rate = damping(params, &schedule.cos_theta);
    let n = drive.len();
    let mut dark = Vec::with_capacity(n);
    let mut d = d0;
    dark.push(d);
    for i in 0..n - 1 {
        let (f0, f1, f2) = (drive[i], midpoint(&drive, i), drive[i + 1]);
        let (r0, r1, r2) = (rate[i], midpoint(&rate, i), rate[i + 1]);
        let k1 = f0 - d * r0;
        let k2 = f1 - (d + k1 * (0.5 * dt)) * r1;
        let k3 = f1 - (d + k2 * (0.5 * dt)) * r1;
        let k4 = f2 - (d + k3 * dt) * r2;
        d += (k1 + k2 * 2.0 + k3 * 2.0 + k4) * (dt / 6.0);
        dark.push(d);
    }
    dark
}

/// Evaluates
/// `D(t) = sqrt(gamma) int cos(theta) phi_in exp(-int_tau^t rate)`
/// by quadrature: `D_{i+1} = D_i exp(-dC_i) + int_i cos phi exp(C - C_{i+1})`
/// with the fourth-order interval rule.
pub fn quadrature_solution(
    params: &SystemParams,
    pulse: &PulseEnvelope,
    schedule: &ControlSchedule,
) -> Result<ReducedTrajectory> {
    check_inputs(params, schedule, pulse)?;
    let mut warnings = Vec::new();
    let v = pulse.values();
    let tail = v[0].norm_sqr();
    if tail > 1e-12 {
        warnings.push(format!("input already present at t_start: |phi_in|^2 = {tail:.3e}"));
    }
    let dark = quadrature_dark(params, schedule, v, Complex64::new(0.0, 0.0));
    Ok(ReducedTrajectory::assemble(params, schedule, pulse, dark, warnings))
}

/// The quadrature recursion on raw input samples from `D(t_start) = d0`.
pub(crate) fn quadrature_dark(
    params: &SystemParams,
    schedule: &ControlSchedule,
    phi_in: &[Complex64],
    d0: Complex64,
) -> Vec<Complex64> {
    let sg = params.gamma.sqrt();
    let dt = schedule.grid.dt();
    let n = phi_in.len();
    let f: Vec<Complex64> =
        phi_in.iter().zip(&schedule.cos_theta).map(|(p, c)| p * (sg * c)).collect();
    let big_c = cumulative_integral(&damping(params, &schedule.cos_theta), dt);
    let mut dark = Vec::with_capacity(n);
    let mut d = d0;
    dark.push(d);
    for i in 0..n - 1 {
        let lo = if n < 4 || i == 0 { 0 } else if i + 2 >= n { n - 4 } else { i - 1 };
        let hi = if n < 4 { n } else { lo + 4 };
        let local: Vec<Complex64> =
            (lo..hi).map(|j| f[j] * (big_c[j] - big_c[i + 1]).exp()).collect();
        let step = interval_integral(&local, i - lo, dt);
        d = d * (big_c[i] - big_c[i + 1]).exp() + step;
        dark.push(d);
    }
    dark
}

/// Loading-phase output `phi_out = phi_in - sqrt(gamma) cos(theta) D` with
/// `D` from [`quadrature_solution`].
pub fn loading_output(
    params: &SystemParams,
    pulse: &PulseEnvelope,
    schedule: &ControlSchedule,
) -> Result<ReducedTrajectory> {
    quadrature_solution(params, pulse, schedule)
}

/// Output of a cavity held at a constant mixing angle.
#[derive(Debug, Clone, PartialEq)]
pub struct DecayResponse {
    /// `gamma cos^2(theta)`.
    pub gamma_eff: f64,
    pub trajectory: ReducedTrajectory,
    /// `Re <phi_in|phi_out>`: `+1` for a detuned mirror, `-1` for an
    /// instantaneous resonant one.
    pub reflected_overlap: f64,
    /// Time from the input peak until `|phi_out|` last exceeds `1/e` of its
    /// maximum.
    pub tail_duration: f64,
}

/// Loading output at fixed `gamma_eff = gamma cos^2(theta)` on
/// `[t_start, t_end]`, sampled finely enough that `gamma_eff dt <= 0.02`.
pub fn effective_decay_response(
    params: &SystemParams,
    family: PulseFamily,
    gamma_eff: f64,
    t_start: f64,
    t_end: f64,
) -> Result<DecayResponse> {
    if !(gamma_eff > 0.0 && gamma_eff <= params.gamma) {
        return Err(Error::Domain(format!(
            "effective decay {gamma_eff} must lie in (0, gamma = {}]",
            params.gamma
        )));
    }
    let t = params.t_pulse;
    let dt = (t / 200.0).min(0.02 / gamma_eff);
    let n = ((t_end - t_start) / dt).ceil() as usize + 1;
    let grid = TimeGrid::new(t_start, t_end, n)?;
    let pulse = make_pulse(family, grid, t, 0.0)?;
    let schedule = ControlSchedule::constant(params, grid, (gamma_eff / params.gamma).sqrt())?;
    let trajectory = loading_output(params, &pulse, &schedule)?;
    let overlap: Vec<f64> = trajectory.phi_in.iter().zip(&trajectory.phi_out).map(|(a, b)| (a.conj() * b).re).collect();
    let reflected_overlap = cumulative_integral(&overlap, grid.dt())[n - 1];
    let peak = trajectory.phi_out.iter().map(|v| v.norm()).fold(0.0, f64::max);
    let last = trajectory
        .phi_out
        .iter()
        .rposition(|v| v.norm() > peak / std::f64::consts::E)
        .unwrap_or(0);
    let tail_duration = grid.time(last) - pulse.waveform().peak_time();
    Ok(DecayResponse { gamma_eff, trajectory, reflected_overlap, tail_duration })
}

/// Asymptotic `|D(t_end)|` for the pulse delayed by each `delta_t` against
/// a fixed schedule.
pub fn timing_sensitivity(
    params: &SystemParams,
    pulse: &PulseEnvelope,
    schedule: &ControlSchedule,
    deltas: &[f64],
) -> Result<Vec<f64>> {
    deltas
        .par_iter()
        .map(|&dt| {
            let shifted = shift(pulse, dt)?;
            Ok(integrate_dark_state(params, &shifted, schedule)?.final_amplitude().norm())
        })
        .collect()
}

/// Fits `1 - |D| = a * delta_t^p`; returns `(a, p)`.
pub fn fit_timing_loss(deltas: &[f64], amplitudes: &[f64]) -> Result<(f64, f64)> {
    let pairs: Vec<(f64, f64)> = deltas
        .iter()
        .zip(amplitudes)
        .filter(|(d, _)| **d != 0.0)
        .map(|(d, a)| (d.abs(), 1.0 - a))
        .collect();
    if pairs.len() < 2 || pairs.iter().any(|(_, l)| !(*l > 0.0)) {
        return Err(Error::Domain("timing fit needs two nonzero offsets with positive loss".into()));
    }
    let x: Vec<f64> = pairs.iter().map(|p| p.0).collect();
    let y: Vec<f64> = pairs.iter().map(|p| p.1).collect();
    Ok(power_law_fit(&x, &y))
}

/// Writes `t, cos_theta, D_re, D_im, population, phi_in_re, phi_in_im,
/// phi_out_re, phi_out_im`.
pub fn write_reduced_csv<W: Write>(mut out: W, traj: &ReducedTrajectory) -> Result<()> {
    writeln!(out, "t,cos_theta,D_re,D_im,population,phi_in_re,phi_in_im,phi_out_re,phi_out_im")?;
    for (i, t) in traj.grid.times().iter().enumerate() {
        let (d, a, b) = (traj.dark[i], traj.phi_in[i], traj.phi_out[i]);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{}",
            sci(*t),
            sci(traj.cos_theta[i]),
            sci(d.re),
            sci(d.im),
            sci(traj.population[i]),
            sci(a.re),
            sci(a.im),
            sci(b.re),
            sci(b.im)
        )?;
    }
    Ok(())
}
