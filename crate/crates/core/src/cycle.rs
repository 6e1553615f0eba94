//! Load, hold and release of a single photon, and the polarization-qubit
//! mapping onto two independent spin channels.
//!
//! During the hold the drive is off (`cos(theta) = 0`), so the dark state is
//! a pure spin excitation that decays only with the single-atom rate:
//! `D(t_1) = D(t_0) exp(-gamma_c (t_1 - t_0) / 2)`. Release then emits
//!
//! ```text
//! phi_out(t) = -sqrt(gamma) D(t_1) cos(theta(t)) exp(-(gamma/2) int_{t_1}^t cos^2(theta))
//! ```

use num_complex::Complex64;

use crate::control::{sech_matched_cos_theta, ControlSchedule};
use crate::error::{Error, Result};
use crate::full::{encode_input_modes, integrate_full, FullOptions, ModeBank};
use crate::grid::{cumulative_integral, TimeGrid};
use crate::model::SystemParams;
use crate::pulses::{PulseEnvelope, Waveform};
use crate::reduced::{integrate_dark_state, rk4_dark, ReducedTrajectory};

/// `cos(theta)` below which the cavity counts as decoupled.
pub const DECOUPLED_TOL: f64 = 1e-6;

/// Load schedule, hold and release schedule of one memory cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct CyclePlan {
    pub params: SystemParams,
    pub load_schedule: ControlSchedule,
    pub hold_duration: f64,
    pub release_schedule: ControlSchedule,
}

impl CyclePlan {
    pub fn new(
        params: SystemParams,
        load_schedule: ControlSchedule,
        hold_duration: f64,
        release_schedule: ControlSchedule,
    ) -> Result<Self> {
        params.validate()?;
        if !(hold_duration >= 0.0) || !hold_duration.is_finite() {
            return Err(Error::Domain(format!("hold duration must be >= 0, got {hold_duration}")));
        }
        for (name, s) in [("load", &load_schedule), ("release", &release_schedule)] {
            if !s.feasible {
                return Err(Error::Infeasible(format!("{name} schedule: {}", s.diagnostics.join("; "))));
            }
        }
        let end = load_schedule.cos_theta[load_schedule.cos_theta.len() - 1];
        if end > DECOUPLED_TOL {
            return Err(Error::Domain(format!("load schedule ends at cos(theta) = {end:.3e}, not 0")));
        }
        let start = release_schedule.cos_theta[0];
        if start > DECOUPLED_TOL {
            return Err(Error::Domain(format!("release schedule starts at cos(theta) = {start:.3e}, not 0")));
        }
        let t1 = load_schedule.grid.t_end() + hold_duration;
        if (release_schedule.grid.t_start() - t1).abs() > 1e-9 * t1.abs().max(1.0) {
            return Err(Error::GridMismatch(format!(
                "release starts at {} but load end + hold = {t1}",
                release_schedule.grid.t_start()
            )));
        }
        Ok(Self { params, load_schedule, hold_duration, release_schedule })
    }

    /// Release with the load schedule mirrored in time:
    /// `cos_rel(t_1 + s) = cos_load(t_end - s)`.
    pub fn time_reversed(params: SystemParams, load_schedule: ControlSchedule, hold_duration: f64) -> Result<Self> {
        let release = load_schedule.time_reversed(load_schedule.grid.t_end() + hold_duration)?;
        Self::new(params, load_schedule, hold_duration, release)
    }

    /// Matched sech loading on `[-10T, 10T]` with `n_points` samples, the
    /// given hold and a time-reversed release.
    pub fn sech(params: SystemParams, n_points: usize, hold_duration: f64) -> Result<Self> {
        let t = params.t_pulse;
        let grid = TimeGrid::new(-10.0 * t, 10.0 * t, n_points)?;
        let load = sech_matched_cos_theta(&params, grid)?;
        Self::time_reversed(params, load, hold_duration)
    }

    /// Start of the release, `t_1`.
    pub fn release_time(&self) -> f64 {
        self.release_schedule.grid.t_start()
    }
}

/// Probabilities of where the photon went.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CycleLedger {
    /// Never entered: `int |phi_out|^2` during loading.
    pub reflected: f64,
    /// `|D(t_0)|^2` at the end of loading.
    pub stored: f64,
    /// Lost to spin decay during the hold.
    pub decayed: f64,
    /// `int |phi_out|^2` during release.
    pub released: f64,
    /// `|D|^2` left at the end of the release window.
    pub residual: f64,
    /// Input outside the loading window, scattered by the excited state or
    /// left outside the dark state.
    pub missed: f64,
}

impl CycleLedger {
    /// `reflected + decayed + released + residual + missed`, one when closed.
    pub fn total(&self) -> f64 {
        self.reflected + self.decayed + self.released + self.residual + self.missed
    }
}

/// Emitted packet from a stored amplitude.
#[derive(Debug, Clone, PartialEq)]
pub struct ReleasedPulse {
    pub waveform: Waveform,
    /// Dark-state amplitude left at the end of the release grid.
    pub residual_amplitude: Complex64,
}

/// Outcome of [`run_cycle`].
#[derive(Debug, Clone, PartialEq)]
pub struct CycleResult {
    pub load: ReducedTrajectory,
    /// `D(t_0)` at the end of loading.
    pub stored_amplitude: Complex64,
    /// `D(t_1)` at the start of the release.
    pub release_amplitude: Complex64,
    pub output: ReleasedPulse,
    pub ledger: CycleLedger,
}

/// Closed-form release from `D(t_1)` under `release_schedule`.
pub fn release_envelope(
    params: &SystemParams,
    d_release: Complex64,
    release_schedule: &ControlSchedule,
) -> Result<ReleasedPulse> {
    let c0 = release_schedule.cos_theta[0];
    if c0 > DECOUPLED_TOL {
        return Err(Error::Domain(format!("release schedule starts at cos(theta) = {c0:.3e}, not 0")));
    }
    let sq: Vec<f64> = release_schedule.cos_theta.iter().map(|c| c * c).collect();
    let big_c = cumulative_integral(&sq, release_schedule.grid.dt());
    let sg = params.gamma.sqrt();
    let half = 0.5 * params.gamma;
    let values = release_schedule
        .cos_theta
        .iter()
        .zip(&big_c)
        .map(|(c, ci)| -d_release * (sg * c * (-half * ci).exp()))
        .collect();
    let residual_amplitude = d_release * (-half * big_c[big_c.len() - 1]).exp();
    Ok(ReleasedPulse { waveform: Waveform { grid: release_schedule.grid, values }, residual_amplitude })
}

fn load_scaled(plan: &CyclePlan, pulse: &PulseEnvelope, amplitude: Complex64) -> Result<ReducedTrajectory> {
    let mut transfer = plan.params;
    transfer.gamma_c = 0.0;
    let unit = integrate_dark_state(&transfer, pulse, &plan.load_schedule)?;
    if amplitude == Complex64::new(1.0, 0.0) {
        return Ok(unit);
    }
    let scaled: Vec<Complex64> = pulse.values().iter().map(|v| v * amplitude).collect();
    let dark = rk4_dark(&transfer, &plan.load_schedule, &scaled, Complex64::new(0.0, 0.0));
    let sg = transfer.gamma.sqrt();
    let phi_out = scaled
        .iter()
        .zip(&dark)
        .zip(&plan.load_schedule.cos_theta)
        .map(|((p, d), c)| p - d * (sg * c))
        .collect();
    Ok(ReducedTrajectory {
        population: dark.iter().map(|d| d.norm_sqr()).collect(),
        dark,
        phi_in: scaled,
        phi_out,
        ..unit
    })
}

fn energy(values: &[Complex64], dt: f64) -> f64 {
    let p: Vec<f64> = values.iter().map(|v| v.norm_sqr()).collect();
    cumulative_integral(&p, dt)[p.len() - 1]
}

/// Runs one cycle with input `amplitude * phi_in`.
///
/// Loading and release use the reduced model without spin decay; the hold
/// applies `gamma_c` analytically.
pub fn run_cycle_with_amplitude(plan: &CyclePlan, pulse: &PulseEnvelope, amplitude: Complex64) -> Result<CycleResult> {
    plan.load_schedule.grid.ensure_matches(pulse.grid(), "load schedule and pulse")?;
    let load = load_scaled(plan, pulse, amplitude)?;
    let stored_amplitude = load.final_amplitude();
    let release_amplitude = stored_amplitude * (-0.5 * plan.params.gamma_c * plan.hold_duration).exp();
    let output = release_envelope(&plan.params, release_amplitude, &plan.release_schedule)?;
    let dt = plan.load_schedule.grid.dt();
    let input = energy(&load.phi_in, dt);
    let reflected = energy(&load.phi_out, dt);
    let stored = stored_amplitude.norm_sqr();
    let released = energy(&output.waveform.values, plan.release_schedule.grid.dt());
    let total_in = amplitude.norm_sqr();
    let ledger = CycleLedger {
        reflected,
        stored,
        decayed: stored - release_amplitude.norm_sqr(),
        released,
        residual: output.residual_amplitude.norm_sqr(),
        missed: (total_in - input).max(0.0),
    };
    Ok(CycleResult { load, stored_amplitude, release_amplitude, output, ledger })
}

pub fn run_cycle(plan: &CyclePlan, pulse: &PulseEnvelope) -> Result<CycleResult> {
    run_cycle_with_amplitude(plan, pulse, Complex64::new(1.0, 0.0))
}

/// Released photon number for each hold duration, with the load fixed and
/// the release mirrored after each hold.
pub fn hold_sweep(
    params: SystemParams,
    load_schedule: &ControlSchedule,
    pulse: &PulseEnvelope,
    holds: &[f64],
) -> Result<Vec<f64>> {
    holds
        .iter()
        .map(|&h| {
            let plan = CyclePlan::time_reversed(params, load_schedule.clone(), h)?;
            Ok(run_cycle(&plan, pulse)?.ledger.released)
        })
        .collect()
}

/// Decay rate of `released(hold) ~ exp(-rate * hold)`.
pub fn fit_storage_decay(holds: &[f64], released: &[f64]) -> Result<f64> {
    if holds.len() < 2 || released.iter().any(|r| !(*r > 0.0)) {
        return Err(Error::Domain("decay fit needs two holds with positive output".into()));
    }
    let y: Vec<f64> = released.iter().map(|r| r.ln()).collect();
    Ok(-crate::grid::linear_fit(holds, &y).0)
}

/// Least-squares fit `|phi| ~ A sech(2 (t - t_c) / w)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SechFit {
    pub amplitude: f64,
    pub center: f64,
    pub width: f64,
    /// `sqrt(sum r^2 / sum |phi|^2)`.
    pub residual: f64,
}

/// Levenberg-Marquardt fit of a sech to `|values|`.
pub fn fit_sech(waveform: &Waveform) -> Result<SechFit> {
    let t = waveform.grid.times();
    let y: Vec<f64> = waveform.values.iter().map(|v| v.norm()).collect();
    let peak = y.iter().cloned().fold(0.0, f64::max);
    if !(peak > 0.0) {
        return Err(Error::Domain("cannot fit a sech to a zero envelope".into()));
    }
    let ip = y.iter().position(|v| *v == peak).unwrap();
    let above = y.iter().filter(|v| **v >= 0.5 * peak).count() as f64 * waveform.grid.dt();
    let mut p = [peak, t[ip], (above / 1.3170).max(waveform.grid.dt())];
    let model = |p: &[f64; 3], ti: f64| {
        let x = 2.0 * (ti - p[1]) / p[2];
        let s = 1.0 / x.cosh();
        (p[0] * s, s, x.tanh())
    };
    let cost = |p: &[f64; 3]| t.iter().zip(&y).map(|(ti, yi)| (model(p, *ti).0 - yi).powi(2)).sum::<f64>();
    let mut lambda = 1e-3;
    let mut current = cost(&p);
    for _ in 0..200 {
        let mut jtj = [[0.0; 3]; 3];
        let mut jtr = [0.0; 3];
        for (ti, yi) in t.iter().zip(&y) {
            let (f, s, th) = model(&p, *ti);
            let x = 2.0 * (ti - p[1]) / p[2];
            // d/dA, d/dt_c, d/dw of A sech(x)
            let j = [s, f * th * 2.0 / p[2], f * th * x / p[2]];
            let r = yi - f;
            for a in 0..3 {
                jtr[a] += j[a] * r;
                for b in 0..3 {
                    jtj[a][b] += j[a] * j[b];
                }
            }
        }
        let mut improved = false;
        for _ in 0..20 {
            let mut m = jtj;
            for a in 0..3 {
                m[a][a] *= 1.0 + lambda;
            }
            let Some(step) = solve3(m, jtr) else { break };
            let trial = [p[0] + step[0], p[1] + step[1], p[2] + step[2]];
            if trial[2] > 0.0 {
                let c = cost(&trial);
                if c < current {
                    let rel = (current - c) / current.max(f64::MIN_POSITIVE);
                    p = trial;
                    current = c;
                    lambda = (lambda / 3.0).max(1e-12);
                    improved = rel > 1e-15;
                    break;
                }
            }
            lambda *= 4.0;
        }
        if !improved {
            break;
        }
    }
    let norm: f64 = y.iter().map(|v| v * v).sum();
    Ok(SechFit { amplitude: p[0], center: p[1], width: p[2], residual: (current / norm).sqrt() })
}

fn solve3(m: [[f64; 3]; 3], r: [f64; 3]) -> Option<[f64; 3]> {
    let det = |m: &[[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1]) - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let d = det(&m);
    if d == 0.0 || !d.is_finite() {
        return None;
    }
    let mut out = [0.0; 3];
    for (k, o) in out.iter_mut().enumerate() {
        let mut mk = m;
        for row in 0..3 {
            mk[row][k] = r[row];
        }
        *o = det(&mk) / d;
    }
    Some(out)
}

/// Photon polarization `alpha |sigma+> + beta |sigma->`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PolarizationState {
    pub alpha: Complex64,
    pub beta: Complex64,
}

impl PolarizationState {
    pub fn new(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = alpha.norm_sqr() + beta.norm_sqr();
        if (n - 1.0).abs() > 1e-12 {
            return Err(Error::Domain(format!("qubit not normalized: |alpha|^2 + |beta|^2 = {n}")));
        }
        Ok(Self { alpha, beta })
    }

    /// Normalizes an arbitrary nonzero pair.
    pub fn normalized(alpha: Complex64, beta: Complex64) -> Result<Self> {
        let n = (alpha.norm_sqr() + beta.norm_sqr()).sqrt();
        if !(n > 0.0) {
            return Err(Error::Domain("zero qubit".into()));
        }
        Ok(Self { alpha: alpha / n, beta: beta / n })
    }

    /// `|<self|other>|^2`.
    pub fn fidelity(&self, other: &PolarizationState) -> f64 {
        (self.alpha.conj() * other.alpha + self.beta.conj() * other.beta).norm_sqr()
    }

    /// `arg(beta / alpha)`.
    pub fn relative_phase(&self) -> f64 {
        (self.beta / self.alpha).arg()
    }
}

/// Outcome of a polarization cycle.
#[derive(Debug, Clone, PartialEq)]
pub struct PolarizationResult {
    /// Collective spin amplitudes `c+`, `c-` at the end of loading.
    pub stored_plus: Complex64,
    pub stored_minus: Complex64,
    pub released: PolarizationState,
    pub fidelity: f64,
    /// `arg(c- / c+) - arg(beta / alpha)`, wrapped to `(-pi, pi]`.
    pub phase_error: f64,
    pub plus: CycleResult,
    pub minus: CycleResult,
}

fn wrap(phase: f64) -> f64 {
    let w = phase.rem_euclid(std::f64::consts::TAU);
    if w > std::f64::consts::PI {
        w - std::f64::consts::TAU
    } else {
        w
    }
}

/// Projects each released channel on the unit-amplitude release shape.
fn released_qubit(plan: &CyclePlan, plus: &Waveform, minus: &Waveform) -> Result<PolarizationState> {
    let shape = release_envelope(&plan.params, Complex64::new(1.0, 0.0), &plan.release_schedule)?.waveform;
    let norm = shape.overlap(&shape)?;
    PolarizationState::normalized(shape.overlap(plus)? / norm, shape.overlap(minus)? / norm)
}

fn spin(load_end: Complex64, cos_theta: f64) -> Complex64 {
    Complex64::i() * load_end * ((1.0 - cos_theta) * (1.0 + cos_theta)).sqrt()
}

/// Stores and releases a polarization qubit: the two circular components
/// run as independent cycles with inputs `alpha phi_in` and `beta phi_in`.
pub fn run_polarization_cycle(
    plan: &CyclePlan,
    pulse: &PulseEnvelope,
    qubit: &PolarizationState,
) -> Result<PolarizationResult> {
    PolarizationState::new(qubit.alpha, qubit.beta)?;
    let (plus, minus) = rayon::join(
        || run_cycle_with_amplitude(plan, pulse, qubit.alpha),
        || run_cycle_with_amplitude(plan, pulse, qubit.beta),
    );
    let (plus, minus) = (plus?, minus?);
    let released = released_qubit(plan, &plus.output.waveform, &minus.output.waveform)?;
    let c_end = plan.load_schedule.cos_theta[plan.load_schedule.cos_theta.len() - 1];
    let stored_plus = spin(plus.stored_amplitude, c_end);
    let stored_minus = spin(minus.stored_amplitude, c_end);
    Ok(PolarizationResult {
        phase_error: stored_phase_error(stored_plus, stored_minus, qubit),
        fidelity: qubit.fidelity(&released),
        stored_plus,
        stored_minus,
        released,
        plus,
        minus,
    })
}

fn stored_phase_error(plus: Complex64, minus: Complex64, qubit: &PolarizationState) -> f64 {
    if plus.norm() == 0.0 || minus.norm() == 0.0 || qubit.alpha.norm() == 0.0 || qubit.beta.norm() == 0.0 {
        return 0.0;
    }
    wrap((minus / plus).arg() - qubit.relative_phase())
}

/// Polarization cycle with the loading run through the full model, one
/// mode bank per channel. Hold and release use the closed forms, starting
/// from the full-model dark amplitude.
pub fn run_polarization_cycle_full(
    plan: &CyclePlan,
    pulse: &PulseEnvelope,
    qubit: &PolarizationState,
    bank: &ModeBank,
    options: &FullOptions,
) -> Result<PolarizationResult> {
    PolarizationState::new(qubit.alpha, qubit.beta)?;
    let modes = encode_input_modes(pulse, bank)?;
    let channel = |amp: Complex64| -> Result<(Complex64, CycleResult)> {
        let mut scaled = modes.clone();
        scaled.values.iter_mut().for_each(|v| *v *= amp);
        let mut transfer = plan.params;
        transfer.gamma_c = 0.0;
        let full = integrate_full(&transfer, bank, &scaled, &plan.load_schedule, options)?;
        let n = full.c.len() - 1;
        // full-model dark amplitude is the negative of the reduced one
        let stored = -full.dark[n];
        let mut reduced = load_scaled(plan, pulse, amp)?;
        reduced.dark = full.dark.iter().map(|d| -d).collect();
        reduced.population = full.population.clone();
        let release_amplitude = stored * (-0.5 * plan.params.gamma_c * plan.hold_duration).exp();
        let output = release_envelope(&plan.params, release_amplitude, &plan.release_schedule)?;
        let released = energy(&output.waveform.values, plan.release_schedule.grid.dt());
        let ledger = CycleLedger {
            reflected: full.norm[n] - full.residual_excitation(),
            stored: stored.norm_sqr(),
            decayed: stored.norm_sqr() - release_amplitude.norm_sqr(),
            released,
            residual: output.residual_amplitude.norm_sqr(),
            missed: (amp.norm_sqr() - full.norm[n]).max(0.0) + full.residual_excitation() - stored.norm_sqr(),
        };
        Ok((full.c[n], CycleResult { load: reduced, stored_amplitude: stored, release_amplitude, output, ledger }))
    };
    let (plus, minus) = rayon::join(|| channel(qubit.alpha), || channel(qubit.beta));
    let ((c_plus, plus), (c_minus, minus)) = (plus?, minus?);
    let released = released_qubit(plan, &plus.output.waveform, &minus.output.waveform)?;
    Ok(PolarizationResult {
        phase_error: stored_phase_error(c_plus, c_minus, qubit),
        fidelity: qubit.fidelity(&released),
        stored_plus: c_plus,
        stored_minus: c_minus,
        released,
        plus,
        minus,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::make_sech;
    use std::f64::consts::{FRAC_1_SQRT_2, FRAC_PI_4, LN_2};

    fn params(gamma_c_t: f64) -> SystemParams {
        SystemParams::from_dimensionless(4.0, 30.0, 1.0, gamma_c_t, 1, 1.0).unwrap()
    }

    fn plan(gamma_c_t: f64, hold: f64) -> CyclePlan {
        CyclePlan::sech(params(gamma_c_t), 4097, hold).unwrap()
    }

    fn pulse(p: &CyclePlan) -> PulseEnvelope {
        make_sech(p.load_schedule.grid, 1.0, 0.0).unwrap()
    }

    #[test]
    fn default_release_is_centred_at_thirty() {
        let p = plan(0.0, 10.0);
        assert_eq!(p.release_time(), 20.0);
        let r = run_cycle(&p, &pulse(&p)).unwrap();
        assert!((r.output.waveform.peak_time() - 30.0).abs() < 0.01);
    }

    #[test]
    fn zero_hold_keeps_amplitude() {
        let p = plan(0.3, 0.0);
        let r = run_cycle(&p, &pulse(&p)).unwrap();
        assert_eq!(r.release_amplitude, r.stored_amplitude);
    }

    #[test]
    fn decay_of_two_ln_two_quarters_the_output() {
        let hold = 5.0;
        let p = plan(2.0 * LN_2 / hold, hold);
        let r = run_cycle(&p, &pulse(&p)).unwrap();
        let stored = r.stored_amplitude.norm_sqr();
        assert!((r.release_amplitude.norm_sqr() - stored / 4.0).abs() < 1e-12);
        assert!((r.ledger.released - stored / 4.0).abs() < 1e-4);
        assert!((r.ledger.total() - 1.0).abs() < 1e-3);
    }

    #[test]
    fn release_envelope_examples() {
        let p = params(0.0);
        let g = TimeGrid::new(0.0, 10.0, 2001).unwrap();
        let mut cos = vec![0.5; g.len()];
        cos[0] = 0.0;
        let s = ControlSchedule::from_cos_theta(&p, g, cos, f64::INFINITY).unwrap();
        assert!(release_envelope(&p, Complex64::new(1.0, 0.0), &s).is_ok());
        let zero = release_envelope(&p, Complex64::new(0.0, 0.0), &s).unwrap();
        assert!(zero.waveform.values.iter().all(|v| v.norm() == 0.0));

        // constant cos = c0 from t_1: |phi| = sqrt(gamma) c0 exp(-(gamma/2) c0^2 t)
        let s = ControlSchedule::constant(&p, g, 0.0).unwrap();
        assert!(release_envelope(&p, Complex64::new(1.0, 0.0), &s).unwrap().waveform.max_abs() == 0.0);
        let mut cos = vec![0.5; g.len()];
        cos[0] = 0.0;
        let s = ControlSchedule::from_cos_theta(&p, g, cos, f64::INFINITY).unwrap();
        let r = release_envelope(&p, Complex64::new(1.0, 0.0), &s).unwrap();
        for i in (200..g.len()).step_by(150) {
            let t = g.time(i);
            let expected = 2.0 * 0.5 * (-0.5 * 4.0 * 0.25 * t).exp();
            assert!((r.waveform.values[i].norm() - expected).abs() < 1e-3 * expected, "{t}");
        }

        let bad = ControlSchedule::constant(&p, g, 0.5).unwrap();
        assert!(matches!(release_envelope(&p, Complex64::new(1.0, 0.0), &bad), Err(Error::Domain(_))));
    }

    #[test]
    fn plan_validation() {
        let p = params(0.0);
        let g = TimeGrid::new(-10.0, 10.0, 401).unwrap();
        let on = ControlSchedule::constant(&p, g, 0.5).unwrap();
        assert!(CyclePlan::time_reversed(p, on, 1.0).is_err());
        let short = SystemParams::from_dimensionless(2.0, 30.0, 1.0, 0.0, 1, 1.0).unwrap();
        let infeasible = sech_matched_cos_theta(&short, g).unwrap();
        assert!(matches!(CyclePlan::time_reversed(short, infeasible, 1.0), Err(Error::Infeasible(_))));
        assert!(CyclePlan::sech(p, 401, -1.0).is_err());
    }

    #[test]
    fn sech_fit_recovers_parameters() {
        let g = TimeGrid::new(-10.0, 10.0, 2001).unwrap();
        let values = g.times().iter().map(|t| Complex64::new(0.7 / (2.0 * (t - 0.3) / 1.4).cosh(), 0.0)).collect();
        let fit = fit_sech(&Waveform { grid: g, values }).unwrap();
        assert!((fit.amplitude - 0.7).abs() < 1e-9);
        assert!((fit.center - 0.3).abs() < 1e-9);
        assert!((fit.width - 1.4).abs() < 1e-9);
        assert!(fit.residual < 1e-9);
        let gauss = g.times().iter().map(|t| Complex64::new((-t * t).exp(), 0.0)).collect();
        assert!(fit_sech(&Waveform { grid: g, values: gauss }).unwrap().residual > 1e-2);
    }

    #[test]
    fn qubit_normalization_is_enforced() {
        assert!(PolarizationState::new(Complex64::new(1.0, 0.0), Complex64::new(0.1, 0.0)).is_err());
        let q = PolarizationState::new(Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::from_polar(FRAC_1_SQRT_2, FRAC_PI_4)).unwrap();
        assert!((q.relative_phase() - FRAC_PI_4).abs() < 1e-15);
        assert!((q.fidelity(&q) - 1.0).abs() < 1e-15);
    }

    #[test]
    fn polarization_examples() {
        let p = plan(0.0, 10.0);
        let ph = pulse(&p);
        let up = PolarizationState::new(Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)).unwrap();
        let r = run_polarization_cycle(&p, &ph, &up).unwrap();
        assert_eq!(r.stored_minus, Complex64::new(0.0, 0.0));
        assert!(r.stored_plus.norm() > 0.99);

        let q = PolarizationState::new(Complex64::new(FRAC_1_SQRT_2, 0.0), Complex64::from_polar(FRAC_1_SQRT_2, FRAC_PI_4)).unwrap();
        let r = run_polarization_cycle(&p, &ph, &q).unwrap();
        assert!(((r.stored_minus / r.stored_plus).arg() - FRAC_PI_4).abs() < 1e-9);
        assert!(r.phase_error.abs() < 1e-9);
        assert!(1.0 - r.fidelity < 1e-4);
        assert!((r.plus.ledger.total() - 0.5).abs() < 1e-3);
    }
}
