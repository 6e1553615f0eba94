//! Synthesis of the drive schedule `cos(theta(t))`, `Omega(t)` that
//! impedance-matches the cavity dark state to an incoming packet.
//!
//! For an input `phi` the matching condition reads
//!
//! ```text
//! -d/dt ln cos(theta) + d/dt ln phi = (gamma/2) cos^2(theta)
//! ```
//!
//! which has a closed-form solution for the sech packet and is integrated
//! numerically for anything else.

use std::io::{Read, Write};

use crate::error::{Error, Result};
use crate::grid::{derivative, interpolate, midpoint, TimeGrid};
use crate::model::{mixing_angle_from_omega, SystemParams};
use crate::pulses::{grid_from_times, PulseEnvelope};

/// Default drive cap, in units of `g sqrt(N)`.
pub const DEFAULT_OMEGA_CAP: f64 = 1e6;

/// Lower clamp for `cos(theta)` inside the matching solver.
pub const COS_THETA_FLOOR: f64 = 1e-12;

/// Step-halving tolerance of the matching solver.
pub const STEP_HALVING_TOL: f64 = 1e-8;

/// Default adiabaticity margin for "much greater than".
pub const DEFAULT_MARGIN: f64 = 100.0;

const MAX_SUBSTEPS: usize = 512;

/// Sampled mixing angle and drive.
#[derive(Debug, Clone, PartialEq)]
pub struct ControlSchedule {
    pub grid: TimeGrid,
    pub cos_theta: Vec<f64>,
    pub omega: Vec<f64>,
    /// Points where the drive was limited to the cap (including `cos = 1`).
    pub omega_capped: Vec<bool>,
    /// Points where the matching solver clamped `cos(theta)` into `[floor, 1]`.
    pub clamped: Vec<bool>,
    pub feasible: bool,
    pub diagnostics: Vec<String>,
    pub margin_report: Option<AdiabaticityReport>,
}

impl ControlSchedule {
    /// Schedule from `cos(theta)` samples. The drive is derived pointwise and
    /// capped at `omega_cap` (absolute rate).
    pub fn from_cos_theta(
        params: &SystemParams,
        grid: TimeGrid,
        cos_theta: Vec<f64>,
        omega_cap: f64,
    ) -> Result<Self> {
        if cos_theta.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} cos(theta) samples for {} grid points",
                cos_theta.len(),
                grid.len()
            )));
        }
        let gc = params.collective_coupling();
        let mut omega = Vec::with_capacity(grid.len());
        let mut capped = Vec::with_capacity(grid.len());
        for &c in &cos_theta {
            if !(0.0..=1.0).contains(&c) {
                return Err(Error::Domain(format!("cos(theta) = {c} outside [0, 1]")));
            }
            let sin = ((1.0 - c) * (1.0 + c)).sqrt();
            let w = if sin == 0.0 { f64::INFINITY } else { gc * c / sin };
            capped.push(w > omega_cap);
            omega.push(w.min(omega_cap));
        }
        Ok(Self {
            grid,
            clamped: vec![false; cos_theta.len()],
            cos_theta,
            omega,
            omega_capped: capped,
            feasible: true,
            diagnostics: Vec::new(),
            margin_report: None,
        })
    }

    /// Schedule from drive samples; `cos(theta)` follows exactly.
    pub fn from_omega(params: &SystemParams, grid: TimeGrid, omega: Vec<f64>) -> Result<Self> {
        if omega.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} drive samples for {} grid points",
                omega.len(),
                grid.len()
            )));
        }
        let cos_theta = omega
            .iter()
            .map(|&w| mixing_angle_from_omega(params, w).map(|a| a.cos_theta))
            .collect::<Result<Vec<_>>>()?;
        let n = omega.len();
        Ok(Self {
            grid,
            cos_theta,
            omega,
            omega_capped: vec![false; n],
            clamped: vec![false; n],
            feasible: true,
            diagnostics: Vec::new(),
            margin_report: None,
        })
    }

    /// Constant mixing angle on the whole grid.
    pub fn constant(params: &SystemParams, grid: TimeGrid, cos_theta: f64) -> Result<Self> {
        Self::from_cos_theta(
            params,
            grid,
            vec![cos_theta; grid.len()],
            DEFAULT_OMEGA_CAP * params.collective_coupling(),
        )
    }

    /// Limits the drive to `omega_cap` and makes `cos(theta)` follow the
    /// limited drive, so the schedule stays self-consistent everywhere.
    pub fn saturate_drive(&self, params: &SystemParams, omega_cap: f64) -> Result<Self> {
        let mut out = self.clone();
        for i in 0..out.omega.len() {
            if out.omega[i] > omega_cap || out.omega_capped[i] {
                out.omega[i] = omega_cap.min(out.omega[i]);
                out.cos_theta[i] = mixing_angle_from_omega(params, out.omega[i])?.cos_theta;
                out.omega_capped[i] = false;
            }
        }
        out.diagnostics.push(format!("drive saturated at {omega_cap:.6e}"));
        Ok(out)
    }

    /// Mirror image in time, placed on a grid starting at `t_start`:
    /// `cos'(t_start + s) = cos(t_end - s)`.
    pub fn time_reversed(&self, t_start: f64) -> Result<Self> {
        let grid = TimeGrid::new(t_start, t_start + self.grid.span(), self.grid.len())?;
        let rev = |v: &Vec<f64>| v.iter().rev().copied().collect::<Vec<_>>();
        let revb = |v: &Vec<bool>| v.iter().rev().copied().collect::<Vec<_>>();
        Ok(Self {
            grid,
            cos_theta: rev(&self.cos_theta),
            omega: rev(&self.omega),
            omega_capped: revb(&self.omega_capped),
            clamped: revb(&self.clamped),
            feasible: self.feasible,
            diagnostics: self.diagnostics.clone(),
            margin_report: None,
        })
    }

    /// Largest relative mismatch between the stored drive and the drive
    /// implied by `cos(theta)`, over points with a finite, uncapped drive.
    pub fn consistency_error(&self, params: &SystemParams) -> f64 {
        let gc = params.collective_coupling();
        let mut worst: f64 = 0.0;
        for i in 0..self.omega.len() {
            if self.omega_capped[i] || !self.omega[i].is_finite() {
                continue;
            }
            let c = self.cos_theta[i];
            let expected = self.omega[i] / self.omega[i].hypot(gc);
            worst = worst.max((expected - c).abs() / c.max(f64::MIN_POSITIVE));
        }
        worst
    }

    pub fn clamp_events(&self) -> usize {
        self.clamped.iter().filter(|&&c| c).count()
    }
}

fn infeasible_diag(params: &SystemParams) -> String {
    format!(
        "gamma*T = {:.6} < 4: the matched drive would need cos(theta) > 1 before the packet arrives",
        params.gamma_t()
    )
}

/// `cos(theta(t)) = sqrt(2/(gamma T)) sech(2t/T) / sqrt(1 + tanh(2t/T))`,
/// the matched schedule for a sech packet centred at `t = 0`.
///
/// Evaluated as `(2/sqrt(gamma T)) / sqrt(1 + exp(4t/T))`, which is the same
/// function without the cancellation in `1 + tanh` at early times.
pub fn sech_matched_cos_theta(params: &SystemParams, grid: TimeGrid) -> Result<ControlSchedule> {
    let gt = params.gamma_t();
    let t_pulse = params.t_pulse;
    let feasible = gt >= 4.0;
    let amp = 2.0 / gt.sqrt();
    let mut cos_theta = Vec::with_capacity(grid.len());
    let mut omega = Vec::with_capacity(grid.len());
    let mut clamped = Vec::with_capacity(grid.len());
    let mut capped = Vec::with_capacity(grid.len());
    let cap = DEFAULT_OMEGA_CAP * params.collective_coupling();
    for t in grid.times() {
        let u = 2.0 * t / t_pulse;
        let (c, s2) = if u <= 0.0 {
            let e = (2.0 * u).exp();
            (amp / (1.0 + e).sqrt(), (gt * e + (gt - 4.0)) / (gt * (1.0 + e)))
        } else {
            let e = (-2.0 * u).exp();
            (amp * e.sqrt() / (1.0 + e).sqrt(), (gt + (gt - 4.0) * e) / (gt * (1.0 + e)))
        };
        let over = c > 1.0 || s2 <= 0.0;
        let c = c.min(1.0);
        let w = if over || s2 <= 0.0 {
            f64::INFINITY
        } else {
            params.collective_coupling() * c / s2.sqrt()
        };
        clamped.push(over);
        capped.push(w > cap);
        cos_theta.push(c);
        omega.push(w.min(cap));
    }
    let mut diagnostics = Vec::new();
    if !feasible {
        diagnostics.push(infeasible_diag(params));
    }
    Ok(ControlSchedule {
        grid,
        cos_theta,
        omega,
        omega_capped: capped,
        clamped,
        feasible,
        diagnostics,
        margin_report: None,
    })
}

/// `Omega(t) = g sqrt(N) sech(2t/T) / sqrt([1 + tanh(2t/T)][tanh(2t/T) + gamma T/2 - 1])`,
/// with `cos(theta)` derived from the drive. Infeasible for `gamma T < 4`,
/// where the bracket changes sign inside the grid.
pub fn sech_matched_omega(params: &SystemParams, grid: TimeGrid) -> Result<ControlSchedule> {
    let gt = params.gamma_t();
    let gc = params.collective_coupling();
    let cap = DEFAULT_OMEGA_CAP * gc;
    let mut omega = Vec::with_capacity(grid.len());
    let mut capped = Vec::with_capacity(grid.len());
    let mut feasible = gt >= 4.0;
    for t in grid.times() {
        let u = 2.0 * t / params.t_pulse;
        let sech = 1.0 / u.cosh();
        // 1 + tanh(u), free of cancellation for u << 0
        let one_plus_tanh = 2.0 / (1.0 + (-2.0 * u).exp());
        let second = one_plus_tanh + (0.5 * gt - 2.0);
        let w = if second <= 0.0 {
            feasible = false;
            f64::NAN
        } else {
            gc * sech / (one_plus_tanh * second).sqrt()
        };
        if w.is_nan() || w > cap {
            capped.push(true);
            omega.push(cap);
        } else {
            capped.push(false);
            omega.push(w);
        }
    }
    let mut sched = ControlSchedule::from_omega(params, grid, omega)?;
    sched.omega_capped = capped;
    sched.feasible = feasible;
    if !feasible {
        sched.diagnostics.push(infeasible_diag(params));
    }
    Ok(sched)
}

/// Default start value for the matching solver, the early-time asymptote of
/// the sech solution: `min(1, 2/sqrt(gamma T))`.
pub fn default_cos_theta_start(params: &SystemParams) -> f64 {
    (2.0 / params.gamma_t().sqrt()).min(1.0)
}

/// Integrates the impedance-matching condition forward from
/// `cos_theta_start` on the pulse grid with classical RK4.
///
/// Substeps per grid interval are doubled until step halving changes the
/// solution by less than [`STEP_HALVING_TOL`]. Before the packet's support
/// the schedule holds the start value; after it, `cos(theta) = 0`.
pub fn solve_impedance_matching(
    params: &SystemParams,
    pulse: &PulseEnvelope,
    cos_theta_start: f64,
) -> Result<ControlSchedule> {
    if !(cos_theta_start > 0.0 && cos_theta_start <= 1.0) {
        return Err(Error::Domain(format!("cos_theta_start must lie in (0, 1], got {cos_theta_start}")));
    }
    let waveform = pulse.waveform();
    if waveform.imaginary_fraction() > 1e-12 {
        return Err(Error::Domain("impedance matching needs a real-valued envelope".into()));
    }
    let re: Vec<f64> = waveform.values.iter().map(|v| v.re).collect();
    solve_on_samples(params, *pulse.grid(), &re, cos_theta_start)
}

/// The matching solver on bare real samples, without the envelope checks.
pub(crate) fn solve_on_samples(
    params: &SystemParams,
    grid: TimeGrid,
    re: &[f64],
    cos_theta_start: f64,
) -> Result<ControlSchedule> {
    let max = re.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let tiny = 1e-280 * max;
    let first = re.iter().position(|v| v.abs() > tiny).ok_or_else(|| Error::Domain("zero envelope".into()))?;
    let last = re.iter().rposition(|v| v.abs() > tiny).unwrap_or(first);
    for i in first..=last {
        let vanishes = re[i].abs() <= tiny;
        let crosses = i > first && re[i].signum() != re[i - 1].signum();
        if vanishes || crosses {
            return Err(Error::SingularEnvelope { time: grid.time(i) });
        }
    }
    if last - first < 4 {
        return Err(Error::Truncation("envelope support spans fewer than five samples".into()));
    }

    let dt = grid.dt();
    let ln_phi: Vec<f64> = re[first..=last].iter().map(|v| v.abs().ln()).collect();
    let log_rate = derivative(&ln_phi, dt);

    let half_gamma = 0.5 * params.gamma;
    let mut substeps = 1;
    let mut coarse = integrate_matching(&log_rate, dt, half_gamma, cos_theta_start, substeps);
    let (solution, clamp_flags) = loop {
        let fine = integrate_matching(&log_rate, dt, half_gamma, cos_theta_start, 2 * substeps);
        let diff = coarse.0.iter().zip(&fine.0).map(|(a, b)| (a.ln() - b.ln()).abs()).fold(0.0, f64::max);
        if diff < STEP_HALVING_TOL {
            break fine;
        }
        substeps *= 2;
        if substeps > MAX_SUBSTEPS {
            return Err(Error::NumericConvergence(format!(
                "matching ODE: step halving still changes ln cos(theta) by {diff:.3e} at {substeps} substeps"
            )));
        }
        coarse = fine;
    };

    let n = grid.len();
    let mut cos_theta = vec![cos_theta_start; n];
    let mut clamped = vec![false; n];
    cos_theta[first..=last].copy_from_slice(&solution);
    clamped[first..=last].copy_from_slice(&clamp_flags);
    for c in cos_theta.iter_mut().skip(last + 1) {
        *c = 0.0;
    }

    let mut sched = ControlSchedule::from_cos_theta(
        params,
        grid,
        cos_theta,
        DEFAULT_OMEGA_CAP * params.collective_coupling(),
    )?;
    sched.clamped = clamped;
    let n_clamped = sched.clamp_events();
    if n_clamped > 0 {
        sched.diagnostics.push(format!("cos(theta) clamped into [{COS_THETA_FLOOR:e}, 1] at {n_clamped} points"));
    }
    sched.diagnostics.push(format!("matching ODE solved with {} substeps per interval", 2 * substeps));
    if sched.cos_theta[n - 1] > 1e-3 {
        sched.diagnostics.push(format!(
            "cos(theta) = {:.3e} at the end of the grid: the dark state is not decoupled",
            sched.cos_theta[n - 1]
        ));
    }
    Ok(sched)
}

/// RK4 for `dc/dt = c (L(t) - (gamma/2) c^2)`, stepped in `u = ln c` with
/// `c` clamped to `[floor, 1]`.
fn integrate_matching(
    log_rate: &[f64],
    dt: f64,
    half_gamma: f64,
    start: f64,
    substeps: usize,
) -> (Vec<f64>, Vec<bool>) {
    let rhs = |u: f64, l: f64| l - half_gamma * (2.0 * u).exp();
    let lo = COS_THETA_FLOOR.ln();
    let clamp = |u: f64| u.clamp(lo, 0.0);
    let h = dt / substeps as f64;
    let rk4 = |u: f64, h: f64, l0: f64, l1: f64, l2: f64| {
        let k1 = rhs(u, l0);
        let k2 = rhs(clamp(u + 0.5 * h * k1), l1);
        let k3 = rhs(clamp(u + 0.5 * h * k2), l1);
        let k4 = rhs(clamp(u + h * k3), l2);
        u + h / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    };
    let first = start.clamp(COS_THETA_FLOOR, 1.0);
    let mut u = first.ln();
    let mut out = Vec::with_capacity(log_rate.len());
    let mut flags = Vec::with_capacity(log_rate.len());
    out.push(first);
    flags.push(first != start);
    for i in 0..log_rate.len() - 1 {
        let mut hit = false;
        for s in 0..substeps {
            let s0 = s as f64 / substeps as f64;
            let s1 = (s as f64 + 0.5) / substeps as f64;
            let s2 = (s as f64 + 1.0) / substeps as f64;
            let l0 = interpolate(log_rate, i, s0);
            let l1 = if substeps == 1 { midpoint(log_rate, i) } else { interpolate(log_rate, i, s1) };
            let l2 = interpolate(log_rate, i, s2);
            let next = if u == 0.0 || u == lo {
                // pinned at a bound until the free flow turns inward
                let outward = |l: f64| {
                    let g = rhs(u, l);
                    if u == 0.0 {
                        g >= 0.0
                    } else {
                        g <= 0.0
                    }
                };
                if outward(l2) {
                    hit |= outward(l0);
                    u
                } else if !outward(l0) {
                    rk4(u, h, l0, l1, l2)
                } else {
                    hit = true;
                    let (mut a, mut b) = (s0, s2);
                    for _ in 0..60 {
                        let m = 0.5 * (a + b);
                        if outward(interpolate(log_rate, i, m)) {
                            a = m;
                        } else {
                            b = m;
                        }
                    }
                    let rest = (s2 - b) * dt;
                    let lm = interpolate(log_rate, i, 0.5 * (b + s2));
                    rk4(u, rest, interpolate(log_rate, i, b), lm, l2)
                }
            } else {
                rk4(u, h, l0, l1, l2)
            };
            let bounded = clamp(next);
            hit |= bounded != next;
            u = bounded;
        }
        out.push(if u <= lo { COS_THETA_FLOOR } else { u.exp() });
        flags.push(hit);
    }
    (out, flags)
}

/// One adiabaticity ratio and its minimum over the schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticityRatio {
    pub name: &'static str,
    pub value: f64,
    pub pass: bool,
}

/// Margins of the adiabatic-following conditions.
#[derive(Debug, Clone, PartialEq)]
pub struct AdiabaticityReport {
    pub margin: f64,
    pub ratios: Vec<AdiabaticityRatio>,
    pub pass: bool,
}

/// Evaluates, as minima over the schedule,
/// `Omega_0^2/(gamma gamma_a)`, `Omega_0^2 T/gamma_a`,
/// `Omega_0^2/(sqrt(gamma/T) gamma_a)` and `g^2 N/(gamma gamma_a)`,
/// each of which must reach `margin`.
pub fn check_adiabaticity(
    params: &SystemParams,
    schedule: &ControlSchedule,
    margin: f64,
) -> Result<AdiabaticityReport> {
    if !(margin > 1.0) {
        return Err(Error::Domain(format!("adiabaticity margin must exceed 1, got {margin}")));
    }
    let g2n = params.collective_coupling_sqr();
    let min_omega0_sqr = schedule.omega.iter().map(|w| g2n + w * w).fold(f64::INFINITY, f64::min);
    let ratio = |num: f64, den: f64| if den == 0.0 { f64::INFINITY } else { num / den };
    let (gamma, gamma_a, t) = (params.gamma, params.gamma_a, params.t_pulse);
    let values = [
        ("omega0^2/(gamma*gamma_a)", ratio(min_omega0_sqr, gamma * gamma_a)),
        ("omega0^2*T/gamma_a", ratio(min_omega0_sqr * t, gamma_a)),
        ("omega0^2/(sqrt(gamma/T)*gamma_a)", ratio(min_omega0_sqr, (gamma / t).sqrt() * gamma_a)),
        ("g^2N/(gamma*gamma_a)", ratio(g2n, gamma * gamma_a)),
    ];
    let ratios: Vec<_> = values
        .iter()
        .map(|&(name, value)| AdiabaticityRatio { name, value, pass: value >= margin })
        .collect();
    let pass = ratios.iter().all(|r| r.pass);
    Ok(AdiabaticityReport { margin, ratios, pass })
}

/// Writes `t, cos_theta, omega`.
pub fn write_schedule_csv<W: Write>(mut out: W, schedule: &ControlSchedule) -> Result<()> {
    use crate::export::sci;
    writeln!(out, "t,cos_theta,omega")?;
    for (i, t) in schedule.grid.times().iter().enumerate() {
        writeln!(out, "{},{},{}", sci(*t), sci(schedule.cos_theta[i]), sci(schedule.omega[i]))?;
    }
    Ok(())
}

/// Reads a schedule written by [`write_schedule_csv`]. Points whose drive
/// falls short of the value implied by `cos(theta)` are marked as capped.
pub fn read_schedule_csv<R: Read>(reader: R, params: &SystemParams) -> Result<ControlSchedule> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let (mut times, mut cos_theta, mut omega) = (Vec::new(), Vec::new(), Vec::new());
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::Parse(format!("row {}: expected 3 columns, got {}", row + 1, record.len())));
        }
        let field = |j: usize| -> Result<f64> {
            record[j].parse::<f64>().map_err(|e| Error::Parse(format!("row {}, column {}: {e}", row + 1, j + 1)))
        };
        times.push(field(0)?);
        cos_theta.push(field(1)?);
        omega.push(field(2)?);
    }
    let grid = grid_from_times(&times)?;
    let mut sched = ControlSchedule::from_cos_theta(params, grid, cos_theta, f64::INFINITY)?;
    for i in 0..omega.len() {
        let implied = sched.omega[i];
        let given = omega[i];
        if !(given >= 0.0) {
            return Err(Error::Parse(format!("row {}: negative drive", i + 1)));
        }
        sched.omega_capped[i] = implied.is_infinite() || given < implied * (1.0 - 1e-9);
        sched.omega[i] = given;
    }
    Ok(sched)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::pulses::{make_gaussian, make_hyper_gaussian, make_sech};
    use approx::assert_relative_eq;
    use std::f64::consts::FRAC_1_SQRT_2;

    fn params(gamma_t: f64) -> SystemParams {
        SystemParams::from_dimensionless(gamma_t, 30.0, 1.0, 0.0, 1, 1.0).unwrap()
    }

    fn default_grid() -> TimeGrid {
        TimeGrid::new(-10.0, 40.0, 8192).unwrap()
    }

    /// Literal transcription of the sech-matched cosine, usable where
    /// `1 + tanh` does not cancel.
    fn literal_cos(gamma_t: f64, t: f64) -> f64 {
        let u = 2.0 * t;
        (2.0 / gamma_t).sqrt() / u.cosh() / (1.0 + u.tanh()).sqrt()
    }

    /// Closed-form solution of the (Bernoulli) matching equation:
    /// `1/cos^2` times `phi^2` grows as `gamma * int phi^2`.
    fn bernoulli_oracle(gamma: f64, phi: &dyn Fn(f64) -> f64, c0: f64, t0: f64, t: f64) -> f64 {
        // Simpson for int_{t0}^{t} phi^2
        let n = 20_000;
        let h = (t - t0) / n as f64;
        let mut s = phi(t0).powi(2) + phi(t).powi(2);
        for i in 1..n {
            s += phi(t0 + i as f64 * h).powi(2) * if i % 2 == 1 { 4.0 } else { 2.0 };
        }
        let integral = s * h / 3.0;
        (phi(t).powi(2) / (phi(t0).powi(2) / (c0 * c0) + gamma * integral)).sqrt()
    }

    #[test]
    fn sech_cos_theta_examples() {
        let p = params(4.0);
        let grid = TimeGrid::new(-2.0, 2.0, 5).unwrap();
        let s = sech_matched_cos_theta(&p, grid).unwrap();
        assert!(s.feasible);
        assert_relative_eq!(s.cos_theta[2], FRAC_1_SQRT_2, max_relative = 1e-15);
        for (i, t) in grid.times().iter().enumerate() {
            assert_relative_eq!(s.cos_theta[i], literal_cos(4.0, *t), max_relative = 1e-12);
        }
        let far = sech_matched_cos_theta(&p, TimeGrid::new(-40.0, 40.0, 3).unwrap()).unwrap();
        assert_relative_eq!(far.cos_theta[0], 1.0, max_relative = 1e-15);
        assert!(far.cos_theta[2] < 1e-30);
        // gamma T = 9: early asymptote 2/sqrt(gamma T) = 2/3
        let nine = sech_matched_cos_theta(&params(9.0), TimeGrid::new(-40.0, 0.0, 3).unwrap()).unwrap();
        assert_relative_eq!(nine.cos_theta[0], 2.0 / 3.0, max_relative = 1e-14);
    }

    #[test]
    fn sech_omega_examples() {
        let p = params(4.0);
        let gc = p.collective_coupling();
        let grid = TimeGrid::new(-2.0, 2.0, 5).unwrap();
        let s = sech_matched_omega(&p, grid).unwrap();
        assert!(s.feasible);
        assert_relative_eq!(s.omega[2], gc, max_relative = 1e-14);
        let late = sech_matched_omega(&p, TimeGrid::new(0.0, 30.0, 3).unwrap()).unwrap();
        assert!(late.omega[2] < 1e-20 * gc);
        let early = sech_matched_omega(&p, TimeGrid::new(-30.0, 0.0, 3).unwrap()).unwrap();
        assert!(early.omega_capped[0]);
        assert_eq!(early.omega[0], DEFAULT_OMEGA_CAP * gc);
    }

    #[test]
    fn sech_cos_and_omega_agree() {
        for gt in [4.0, 6.0, 20.0] {
            let p = params(gt);
            let a = sech_matched_cos_theta(&p, default_grid()).unwrap();
            let b = sech_matched_omega(&p, default_grid()).unwrap();
            for i in 0..a.grid.len() {
                if a.omega_capped[i] || b.omega_capped[i] {
                    continue;
                }
                assert!((a.omega[i] - b.omega[i]).abs() <= 1e-9 * b.omega[i].max(1e-300), "{gt} {i} {} {} {}", a.omega[i], b.omega[i], a.grid.time(i));
                assert!((a.cos_theta[i] - b.cos_theta[i]).abs() <= 1e-9 * a.cos_theta[i].max(1e-300));
                // the bare-cosine inverse, where cos(theta) is well conditioned
                if a.cos_theta[i] < 0.999 && a.cos_theta[i] > 1e-150 {
                    let w = crate::model::omega_from_cos_theta(&p, a.cos_theta[i]).unwrap();
                    assert!((w - b.omega[i]).abs() <= 1e-9 * b.omega[i]);
                }
            }
            assert!(a.consistency_error(&p) < 1e-9);
            assert!(b.consistency_error(&p) < 1e-9);
        }
    }

    #[test]
    fn short_pulses_are_infeasible() {
        let p = params(2.0);
        let a = sech_matched_cos_theta(&p, default_grid()).unwrap();
        assert!(!a.feasible);
        assert!(a.diagnostics[0].contains("< 4"));
        assert!(a.cos_theta.iter().all(|c| (0.0..=1.0).contains(c)));
        let b = sech_matched_omega(&p, default_grid()).unwrap();
        assert!(!b.feasible);
    }

    #[test]
    fn solver_recovers_sech_solution() {
        let p = params(4.0);
        let grid = default_grid();
        let pulse = make_sech(grid, 1.0, 0.0).unwrap();
        let exact = sech_matched_cos_theta(&p, grid).unwrap();
        let solved = solve_impedance_matching(&p, &pulse, exact.cos_theta[0]).unwrap();
        let err = solved.cos_theta.iter().zip(&exact.cos_theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        assert!(err < 1e-6, "max error {err}");
        assert!(solved.cos_theta[grid.len() - 1] <= COS_THETA_FLOOR, "{:e}", solved.cos_theta[grid.len() - 1]);
    }

    #[test]
    fn solver_matches_bernoulli_oracle_for_gaussian() {
        // gamma T = 8 keeps the Gaussian solution unclamped from t = -2T on
        let p = params(8.0);
        let sub = TimeGrid::new(-2.0, 4.0, 1201).unwrap();
        let samples: Vec<f64> = sub.times().iter().map(|t| (-t * t).exp()).collect();
        let c0 = 0.6;
        let solved = solve_on_samples(&p, sub, &samples, c0).unwrap();
        assert_eq!(solved.clamp_events(), 0);
        let phi = |t: f64| (-t * t).exp();
        for t in [-1.5, -0.5, 0.0, 0.7, 2.0, 3.5] {
            let i = sub.nearest_index(t);
            let oracle = bernoulli_oracle(p.gamma, &phi, c0, sub.t_start(), sub.time(i));
            assert!((solved.cos_theta[i] - oracle).abs() < 1e-7, "t={t}: {} vs {oracle}", solved.cos_theta[i]);
        }
    }

    #[test]
    fn constant_input_reduces_to_classical_matching() {
        // flat input: -d/dt ln c = (gamma/2) c^2, so 1/c^2 = 1/c0^2 + gamma t
        let p = params(4.0);
        let dt = 0.005;
        let log_rate = vec![0.0; 401];
        let c = integrate_matching(&log_rate, dt, 0.5 * p.gamma, 0.8, 4).0;
        for (i, v) in c.iter().enumerate() {
            let expected = 1.0 / (1.0 / 0.64 + p.gamma * i as f64 * dt).sqrt();
            assert!((v - expected).abs() < 1e-10);
        }
    }

    #[test]
    fn solver_handles_gaussian_and_hyper_gaussian() {
        let p = params(4.0);
        let c0 = default_cos_theta_start(&p);
        assert_eq!(c0, 1.0);
        for pulse in [
            make_gaussian(default_grid(), 1.0, 0.0).unwrap(),
            make_hyper_gaussian(default_grid(), 1.0, 0.0).unwrap(),
        ] {
            let s = solve_impedance_matching(&p, &pulse, c0).unwrap();
            assert!(s.clamp_events() > 0);
            assert!(s.cos_theta.iter().all(|c| (0.0..=1.0).contains(c)));
            assert!(s.cos_theta[s.grid.len() - 1] < 1e-6);
        }
    }

    #[test]
    fn solver_rejects_sign_changes_and_complex_input() {
        let p = params(4.0);
        let grid = TimeGrid::new(-10.0, 10.0, 2001).unwrap();
        let odd: Vec<_> = grid
            .times()
            .iter()
            .map(|t| num_complex::Complex64::new(t * (-t * t).exp(), 0.0))
            .collect();
        let pulse = PulseEnvelope::custom(grid, odd, 1.0).unwrap();
        match solve_impedance_matching(&p, &pulse, 1.0) {
            Err(Error::SingularEnvelope { time }) => assert!(time.abs() < 0.02),
            other => panic!("expected singular envelope, got {other:?}"),
        }
        let sech = make_sech(grid, 1.0, 0.0).unwrap();
        let twisted = PulseEnvelope::custom(
            grid,
            sech.values().iter().map(|v| v * num_complex::Complex64::new(0.6, 0.8)).collect(),
            1.0,
        )
        .unwrap();
        assert!(matches!(solve_impedance_matching(&p, &twisted, 1.0), Err(Error::Domain(_))));
        assert!(solve_impedance_matching(&p, &sech, 0.0).is_err());
    }

    #[test]
    fn scale_covariance() {
        // t -> s t, gamma -> gamma/s, T -> s T leaves cos(theta(t/s)) invariant
        let s = 2.0;
        let p1 = SystemParams::new(10.0, 1, 4.0, 0.0, 0.0, 1.0).unwrap();
        let p2 = SystemParams::new(10.0, 1, 4.0 / s, 0.0, 0.0, s).unwrap();
        let g1 = TimeGrid::new(-10.0, 10.0, 2001).unwrap();
        let g2 = TimeGrid::new(-10.0 * s, 10.0 * s, 2001).unwrap();
        let a = sech_matched_cos_theta(&p1, g1).unwrap();
        let b = sech_matched_cos_theta(&p2, g2).unwrap();
        for (x, y) in a.cos_theta.iter().zip(&b.cos_theta) {
            assert!((x - y).abs() <= 1e-14 * x.max(1e-300));
        }
        let pa = make_sech(g1, 1.0, 0.0).unwrap();
        let pb = make_sech(g2, s, 0.0).unwrap();
        let sa = solve_impedance_matching(&p1, &pa, 1.0).unwrap();
        let sb = solve_impedance_matching(&p2, &pb, 1.0).unwrap();
        for (x, y) in sa.cos_theta.iter().zip(&sb.cos_theta) {
            assert!((x - y).abs() < 1e-9);
        }
    }

    #[test]
    fn adiabaticity_examples() {
        let grid = TimeGrid::new(0.0, 1.0, 11).unwrap();
        let free = SystemParams::new(1.0, 1, 4.0, 0.0, 0.0, 1.0).unwrap();
        let r = check_adiabaticity(&free, &ControlSchedule::constant(&free, grid, 0.0).unwrap(), 100.0).unwrap();
        assert!(r.pass);
        assert!(r.ratios.iter().all(|x| x.value.is_infinite()));

        // g^2 N = 100 gamma gamma_a exactly: 20^2 = 100 * 4 * 1
        let edge = SystemParams::new(20.0, 1, 4.0, 1.0, 0.0, 1.0).unwrap();
        let r = check_adiabaticity(&edge, &ControlSchedule::constant(&edge, grid, 0.0).unwrap(), 100.0).unwrap();
        assert_eq!(r.ratios[0].value, 100.0);
        assert!(r.ratios[0].pass);
        assert!(r.pass);

        let weak = SystemParams::new(2.0, 1, 4.0, 1.0, 0.0, 1.0).unwrap();
        let r = check_adiabaticity(&weak, &ControlSchedule::constant(&weak, grid, 0.0).unwrap(), 100.0).unwrap();
        assert_eq!(r.ratios[3].value, 1.0);
        assert!(!r.pass);
        assert!(check_adiabaticity(&weak, &ControlSchedule::constant(&weak, grid, 0.0).unwrap(), 1.0).is_err());
    }

    #[test]
    fn schedule_csv_round_trip() {
        let p = params(4.0);
        let s = sech_matched_cos_theta(&p, TimeGrid::new(-10.0, 10.0, 201).unwrap()).unwrap();
        let mut buf = Vec::new();
        write_schedule_csv(&mut buf, &s).unwrap();
        let back = read_schedule_csv(buf.as_slice(), &p).unwrap();
        assert!(back.grid.matches(&s.grid));
        for i in 0..s.grid.len() {
            assert!((back.cos_theta[i] - s.cos_theta[i]).abs() <= 1e-11 * s.cos_theta[i].max(1e-300));
            assert!((back.omega[i] - s.omega[i]).abs() <= 1e-11 * s.omega[i]);
        }
    }

    #[test]
    fn time_reversal_mirrors_the_schedule() {
        let p = params(4.0);
        let s = sech_matched_cos_theta(&p, TimeGrid::new(-10.0, 10.0, 201).unwrap()).unwrap();
        let r = s.time_reversed(20.0).unwrap();
        assert_eq!(r.grid.t_start(), 20.0);
        assert_eq!(r.grid.t_end(), 40.0);
        assert_eq!(r.cos_theta[0], s.cos_theta[200]);
        assert_eq!(r.cos_theta[200], s.cos_theta[0]);
    }

    #[test]
    fn saturating_the_drive_keeps_consistency() {
        let p = params(4.0);
        let s = sech_matched_cos_theta(&p, default_grid()).unwrap();
        let cap = 10.0 * p.collective_coupling();
        let sat = s.saturate_drive(&p, cap).unwrap();
        assert!(sat.omega.iter().all(|w| *w <= cap));
        assert!(sat.omega_capped.iter().all(|c| !c));
        assert!(sat.consistency_error(&p) < 1e-12);
    }
}
