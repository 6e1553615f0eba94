//! Classical single-sided Fabry-Perot cavity as an independent check of the
//! impedance-matching condition.
//!
//! The circulating field obeys the delay recursion
//!
//! ```text
//! E_c(t)   = T E_in(t) + R zeta E_c(t - tau_c)
//! E_out(t) = R E_in(t) + T zeta E_c(t - tau_c)
//! ```
//!
//! and, to first order in `tau_c`, the rate equation
//! `dE_c/dt = -eta E_c + T / (R zeta tau_c) E_in` with
//! `eta = (1 - R zeta) / (R zeta tau_c)`.

use std::io::Write;

use num_complex::Complex64;

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::export::{sci, write_columns_csv};
use crate::grid::{derivative, interpolate, midpoint, TimeGrid};
use crate::model::{MixingAngle, SystemParams};
use crate::pulses::Waveform;

/// Mirror and round-trip parameters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MirrorCavity {
    /// Real amplitude reflectivity.
    pub r: f64,
    /// Imaginary amplitude transmission `i sqrt(1 - R^2)`.
    pub t_mirror: Complex64,
    /// Round-trip amplitude loss.
    pub zeta: f64,
    pub tau_c: f64,
    pub tau_0: f64,
}

impl MirrorCavity {
    pub fn new(r: f64, zeta: f64, tau_c: f64, tau_0: f64) -> Result<Self> {
        if !(r > 0.0 && r < 1.0) {
            return Err(Error::InvalidParams(format!("reflectivity must lie in (0, 1), got {r}")));
        }
        if !(zeta > 0.0 && zeta <= 1.0) {
            return Err(Error::InvalidParams(format!("round-trip loss must lie in (0, 1], got {zeta}")));
        }
        if !(tau_0 > 0.0) || !tau_0.is_finite() {
            return Err(Error::InvalidParams(format!("tau_0 must be positive, got {tau_0}")));
        }
        if !(tau_c >= tau_0) || !tau_c.is_finite() {
            return Err(Error::InvalidParams(format!("tau_c = {tau_c} is shorter than tau_0 = {tau_0}")));
        }
        Ok(Self { r, t_mirror: Complex64::new(0.0, (1.0 - r * r).sqrt()), zeta, tau_c, tau_0 })
    }

    /// Lossless cavity with `R = 0.99`.
    pub fn lossless(tau_c: f64, tau_0: f64) -> Result<Self> {
        Self::new(0.99, 1.0, tau_c, tau_0)
    }

    /// `gamma = 2 (1 - R) / tau_0`.
    pub fn empty_decay_rate(&self) -> f64 {
        2.0 * (1.0 - self.r) / self.tau_0
    }

    /// `gamma_int = 2 (1 - zeta) / tau_c`.
    pub fn internal_loss_rate(&self) -> f64 {
        2.0 * (1.0 - self.zeta) / self.tau_c
    }

    pub fn eta(&self) -> f64 {
        (1.0 - self.r * self.zeta) / (self.r * self.zeta * self.tau_c)
    }

    /// Circulating field for a constant drive, `T E_in / (1 - R zeta)`.
    pub fn steady_state(&self, e_in: Complex64) -> Complex64 {
        self.t_mirror * e_in / (1.0 - self.r * self.zeta)
    }
}

/// Output of [`roundtrip_simulate`].
#[derive(Debug, Clone, PartialEq)]
pub struct RoundTrip {
    /// One sample per `tau_c / delay_samples`.
    pub grid: TimeGrid,
    pub e_in: Vec<Complex64>,
    pub e_c: Vec<Complex64>,
    pub e_out: Vec<Complex64>,
    pub e_c_rate: Vec<Complex64>,
    pub e_out_rate: Vec<Complex64>,
    pub delay_samples: usize,
    /// Set when the input had to be resampled to a commensurate grid.
    pub resampled: Option<String>,
}

impl RoundTrip {
    /// `max |E_c^rec - E_c^ode| / max |E_c^rec|`.
    pub fn max_relative_deviation(&self) -> f64 {
        let scale = self.e_c.iter().map(|v| v.norm()).fold(0.0, f64::max);
        let dev = self.e_c.iter().zip(&self.e_c_rate).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max);
        if scale > 0.0 {
            dev / scale
        } else {
            dev
        }
    }

    /// `sum |E_in|^2 - |E_out|^2 - |E_c|^2 over the last round trip`, in
    /// units of one sample. Zero for a lossless mirror.
    pub fn energy_imbalance(&self) -> f64 {
        let flux: f64 = self.e_in.iter().zip(&self.e_out).map(|(i, o)| i.norm_sqr() - o.norm_sqr()).sum();
        let n = self.e_c.len();
        let stored: f64 = self.e_c[n.saturating_sub(self.delay_samples)..].iter().map(|v| v.norm_sqr()).sum();
        flux - stored
    }
}

/// Iterates the delay recursion with a circular buffer and integrates the
/// continuum rate equation on the same samples.
pub fn roundtrip_simulate(cav: &MirrorCavity, e_in: &Waveform) -> Result<RoundTrip> {
    let src = e_in.grid;
    let ratio = cav.tau_c / src.dt();
    let m = ratio.round().max(1.0) as usize;
    let (grid, input, resampled) = if (ratio - m as f64).abs() <= 1e-9 * ratio {
        (src, e_in.values.clone(), None)
    } else {
        let h = cav.tau_c / m as f64;
        let n = (src.span() / h).floor() as usize + 1;
        let grid = TimeGrid::with_spacing(src.t_start(), h, n)?;
        let values = grid
            .times()
            .iter()
            .map(|&t| {
                let x = ((t - src.t_start()) / src.dt()).clamp(0.0, (src.len() - 1) as f64);
                let i = (x.floor() as usize).min(src.len() - 2);
                interpolate(&e_in.values, i, x - i as f64)
            })
            .collect();
        let note = format!("tau_c / dt = {ratio:.6} is not an integer; input resampled to dt = {h:.6e}");
        (grid, values, Some(note))
    };

    let (t, r, rz) = (cav.t_mirror, cav.r, cav.r * cav.zeta);
    let n = input.len();
    let mut buffer = vec![Complex64::new(0.0, 0.0); m];
    let mut e_c = Vec::with_capacity(n);
    let mut e_out = Vec::with_capacity(n);
    for (k, x) in input.iter().enumerate() {
        let delayed = buffer[k % m];
        let c = t * x + rz * delayed;
        e_out.push(r * x + t * cav.zeta * delayed);
        e_c.push(c);
        buffer[k % m] = c;
    }

    let eta = cav.eta();
    let drive = t / (rz * cav.tau_c);
    let h = grid.dt();
    let f = |e: Complex64, x: Complex64| -eta * e + drive * x;
    let mut e_c_rate = Vec::with_capacity(n);
    let mut e = Complex64::new(0.0, 0.0);
    e_c_rate.push(e);
    for i in 0..n - 1 {
        let xm = midpoint(&input, i);
        let k1 = f(e, input[i]);
        let k2 = f(e + k1 * (0.5 * h), xm);
        let k3 = f(e + k2 * (0.5 * h), xm);
        let k4 = f(e + k3 * h, input[i + 1]);
        e += (k1 + 2.0 * k2 + 2.0 * k3 + k4) * (h / 6.0);
        e_c_rate.push(e);
    }
    let e_out_rate = input.iter().zip(&e_c_rate).map(|(x, c)| r * x + t * cav.zeta * c).collect();

    Ok(RoundTrip { grid, e_in: input, e_c, e_out, e_c_rate, e_out_rate, delay_samples: m, resampled })
}

/// `gamma_int/2 + d/dt ln E_in - (gamma/2) tau_0/tau_c`, pointwise.
///
/// `tau_ratio` and `gamma_int` are sampled on the grid of `e_in`, which must
/// be real and positive.
pub fn generalized_matching_residual(
    gamma: f64,
    e_in: &Waveform,
    tau_ratio: &[f64],
    gamma_int: &[f64],
) -> Result<Vec<f64>> {
    let n = e_in.values.len();
    if tau_ratio.len() != n || gamma_int.len() != n {
        return Err(Error::GridMismatch("rates must be sampled on the field grid".into()));
    }
    let ln_e = log_envelope(e_in)?;
    let dln = derivative(&ln_e, e_in.grid.dt());
    Ok((0..n).map(|i| 0.5 * gamma_int[i] + dln[i] - 0.5 * gamma * tau_ratio[i]).collect())
}

fn log_envelope(e_in: &Waveform) -> Result<Vec<f64>> {
    e_in.values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            if v.re > 0.0 && v.im.abs() <= 1e-12 * v.re {
                Ok(v.re.ln())
            } else {
                Err(Error::SingularEnvelope { time: e_in.grid.time(i) })
            }
        })
        .collect()
}

/// Residual for a fixed cavity: `tau_0/tau_c` and `gamma_int` constant.
pub fn cavity_matching_residual(cav: &MirrorCavity, e_in: &Waveform) -> Result<Vec<f64>> {
    let n = e_in.values.len();
    generalized_matching_residual(
        cav.empty_decay_rate(),
        e_in,
        &vec![cav.tau_0 / cav.tau_c; n],
        &vec![cav.internal_loss_rate(); n],
    )
}

/// `tau_0 / tau_c = v_gr / c = cos^2(theta)`.
pub fn group_velocity_ratio(angle: &MixingAngle) -> f64 {
    angle.cos_theta * angle.cos_theta
}

/// `gamma_int = -2 d/dt ln cos(theta)`.
pub fn photon_probability_loss_rate(schedule: &ControlSchedule) -> Result<Vec<f64>> {
    let ln_c = schedule
        .cos_theta
        .iter()
        .enumerate()
        .map(|(i, c)| {
            if *c > 0.0 {
                Ok(c.ln())
            } else {
                Err(Error::Domain(format!(
                    "cos(theta) = 0 at t = {}: loss rate is singular, truncate the window",
                    schedule.grid.time(i)
                )))
            }
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(derivative(&ln_c, schedule.grid.dt()).into_iter().map(|d| -2.0 * d).collect())
}

/// Relative input amplitude that bounds the evaluated packet window.
pub const WINDOW_FLOOR: f64 = 1e-12;

/// Residual of the classical condition along a control schedule.
#[derive(Debug, Clone, PartialEq)]
pub struct ScheduleResidual {
    pub grid: TimeGrid,
    /// `None` where the stencil touches a clamped or empty sample.
    pub residual: Vec<Option<f64>>,
}

impl ScheduleResidual {
    pub fn max_abs(&self) -> f64 {
        self.residual.iter().flatten().map(|r| r.abs()).fold(0.0, f64::max)
    }

    pub fn evaluated(&self) -> usize {
        self.residual.iter().flatten().count()
    }
}

/// Substitutes `tau_0/tau_c = cos^2(theta)` and
/// `gamma_int = -2 d/dt ln cos(theta)` into the classical condition.
///
/// Only the packet window `|E_in| >= 1e-12 max |E_in|` is evaluated, and
/// points whose five-point stencil touches a clamped `cos(theta)` are
/// skipped.
pub fn schedule_matching_residual(
    params: &SystemParams,
    schedule: &ControlSchedule,
    e_in: &Waveform,
) -> Result<ScheduleResidual> {
    schedule.grid.ensure_matches(&e_in.grid, "schedule and field")?;
    let n = schedule.grid.len();
    let peak = e_in.max_abs();
    let usable: Vec<bool> = (0..n)
        .map(|i| {
            let v = e_in.values[i];
            !schedule.clamped[i]
                && schedule.cos_theta[i] > 0.0
                && v.re >= WINDOW_FLOOR * peak
                && v.im.abs() <= 1e-12 * v.re
        })
        .collect();
    let dt = schedule.grid.dt();
    let ln_c: Vec<f64> = schedule.cos_theta.iter().map(|c| c.max(f64::MIN_POSITIVE).ln()).collect();
    let ln_e: Vec<f64> = e_in.values.iter().map(|v| v.re.max(f64::MIN_POSITIVE).ln()).collect();
    let dln_c = derivative6(&ln_c, dt);
    let dln_e = derivative6(&ln_e, dt);
    let residual = (0..n)
        .map(|i| {
            let lo = i.saturating_sub(4);
            let hi = (i + 4).min(n - 1);
            if !usable[lo..=hi].iter().all(|u| *u) {
                return None;
            }
            let c = schedule.cos_theta[i];
            let gamma_int = -2.0 * dln_c[i];
            Some(0.5 * gamma_int + dln_e[i] - 0.5 * params.gamma * c * c)
        })
        .collect();
    Ok(ScheduleResidual { grid: schedule.grid, residual })
}

/// Sixth-order central differences, falling back to the five-point stencil
/// within three samples of either end.
fn derivative6(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = derivative(values, dt);
    let f = values;
    for i in 3..f.len().saturating_sub(3) {
        out[i] = (-f[i - 3] + 9.0 * f[i - 2] - 45.0 * f[i - 1] + 45.0 * f[i + 1] - 9.0 * f[i + 2] + f[i + 3])
            / (60.0 * dt);
    }
    out
}

/// CSV with columns `t, E_in, E_c, E_out` (real and imaginary parts) and the
/// rate-equation circulating field.
pub fn write_roundtrip_csv<W: Write>(out: W, rt: &RoundTrip) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record([
        "t", "e_in_re", "e_in_im", "e_c_re", "e_c_im", "e_out_re", "e_out_im", "e_c_rate_re", "e_c_rate_im",
    ])?;
    for i in 0..rt.grid.len() {
        let row = [rt.e_in[i], rt.e_c[i], rt.e_out[i], rt.e_c_rate[i]];
        let mut rec = vec![sci(rt.grid.time(i))];
        for v in row {
            rec.push(sci(v.re));
            rec.push(sci(v.im));
        }
        w.write_record(&rec)?;
    }
    w.flush()?;
    Ok(())
}

/// CSV with columns `t, residual`; skipped points are left empty.
pub fn write_residual_csv<W: Write>(out: W, res: &ScheduleResidual) -> Result<()> {
    let t = res.grid.times();
    let r: Vec<f64> = res.residual.iter().map(|r| r.unwrap_or(f64::NAN)).collect();
    write_columns_csv(out, &["t", "residual"], &[&t, &r])
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::control::{default_cos_theta_start, sech_matched_cos_theta, solve_impedance_matching};
    use crate::pulses::make_sech;

    fn constant_field(grid: TimeGrid, value: f64) -> Waveform {
        Waveform { grid, values: vec![Complex64::new(value, 0.0); grid.len()] }
    }

    #[test]
    fn mirror_invariants() {
        let c = MirrorCavity::lossless(0.01, 0.01).unwrap();
        assert!((c.r * c.r + c.t_mirror.norm_sqr() - 1.0).abs() < 1e-12);
        assert_eq!(c.t_mirror.re, 0.0);
        assert!(MirrorCavity::new(0.99, 1.0, 0.005, 0.01).is_err());
        assert!(MirrorCavity::new(1.0, 1.0, 0.01, 0.01).is_err());
        assert!(MirrorCavity::new(0.9, 0.0, 0.01, 0.01).is_err());
    }

    #[test]
    fn constant_drive_reaches_fixed_point() {
        let cav = MirrorCavity::lossless(0.01, 0.01).unwrap();
        let grid = TimeGrid::with_spacing(0.0, 0.01, 4001).unwrap();
        let rt = roundtrip_simulate(&cav, &constant_field(grid, 1.0)).unwrap();
        assert_eq!(rt.delay_samples, 1);
        let expect = cav.steady_state(Complex64::new(1.0, 0.0));
        assert!((rt.e_c[4000] - expect).norm() < 1e-9 * expect.norm());
        // lossless: everything is reflected in steady state
        assert!((rt.e_out[4000].norm() - 1.0).abs() < 1e-9);
    }

    #[test]
    fn free_decay_is_geometric() {
        let cav = MirrorCavity::new(0.9, 0.95, 0.03, 0.01).unwrap();
        let grid = TimeGrid::with_spacing(0.0, 0.01, 301).unwrap();
        let mut values = vec![Complex64::new(0.0, 0.0); 301];
        values[0] = Complex64::new(1.0, 0.0);
        let rt = roundtrip_simulate(&cav, &Waveform { grid, values }).unwrap();
        assert_eq!(rt.delay_samples, 3);
        for k in 1..50 {
            let ratio = rt.e_c[3 * k] / rt.e_c[3 * (k - 1)];
            assert!((ratio - Complex64::new(0.9 * 0.95, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn matched_loss_cancels_reflection() {
        let cav = MirrorCavity::new(0.99, 0.99, 0.01, 0.01).unwrap();
        let grid = TimeGrid::with_spacing(0.0, 0.01, 20001).unwrap();
        let field = constant_field(grid, 1.0);
        let rt = roundtrip_simulate(&cav, &field).unwrap();
        assert!(rt.e_out[20000].norm() < 1e-3);
        let res = cavity_matching_residual(&cav, &field).unwrap();
        assert!(res.iter().all(|r| r.abs() < 1e-12));
    }

    #[test]
    fn lossless_energy_balance() {
        let cav = MirrorCavity::lossless(0.02, 0.01).unwrap();
        let grid = TimeGrid::new(-10.0, 10.0, 2001).unwrap();
        let pulse = make_sech(grid, 1.0, 0.0).unwrap();
        let rt = roundtrip_simulate(&cav, pulse.waveform()).unwrap();
        let flux: f64 = rt.e_in.iter().map(|v| v.norm_sqr()).sum();
        assert!(rt.energy_imbalance().abs() < 1e-6 * flux);
    }

    #[test]
    fn incommensurate_delay_is_resampled() {
        let cav = MirrorCavity::lossless(0.015, 0.01).unwrap();
        let grid = TimeGrid::new(-10.0, 10.0, 2001).unwrap();
        let pulse = make_sech(grid, 1.0, 0.0).unwrap();
        let rt = roundtrip_simulate(&cav, pulse.waveform()).unwrap();
        assert!(rt.resampled.is_some());
        assert!((rt.grid.dt() * rt.delay_samples as f64 - 0.015).abs() < 1e-15);
    }

    #[test]
    fn group_velocity_examples() {
        let p = SystemParams::new(1.0, 1, 1.0, 0.0, 0.0, 1.0).unwrap();
        let a = MixingAngle::from_cos_theta(&p, std::f64::consts::FRAC_1_SQRT_2).unwrap();
        assert!((group_velocity_ratio(&a) - 0.5).abs() < 1e-15);
        assert_eq!(group_velocity_ratio(&MixingAngle::from_cos_theta(&p, 1.0).unwrap()), 1.0);
        assert_eq!(group_velocity_ratio(&MixingAngle::from_cos_theta(&p, 0.0).unwrap()), 0.0);
    }

    #[test]
    fn loss_rate_examples() {
        let p = SystemParams::from_dimensionless(4.0, 30.0, 1.0, 0.0, 1, 1.0).unwrap();
        let g = TimeGrid::new(0.0, 5.0, 1001).unwrap();
        let flat = ControlSchedule::constant(&p, g, 0.3).unwrap();
        assert!(photon_probability_loss_rate(&flat).unwrap().iter().all(|r| r.abs() < 1e-12));
        let tau = 2.5;
        let cos = g.times().iter().map(|t| (-t / tau).exp()).collect();
        let s = ControlSchedule::from_cos_theta(&p, g, cos, f64::INFINITY).unwrap();
        assert!(photon_probability_loss_rate(&s).unwrap().iter().all(|r| (r - 2.0 / tau).abs() < 1e-9));
        let off = ControlSchedule::constant(&p, g, 0.0).unwrap();
        assert!(photon_probability_loss_rate(&off).is_err());

        let g = TimeGrid::new(-6.0, 6.0, 12001).unwrap();
        let s = sech_matched_cos_theta(&p, g).unwrap();
        let rate = photon_probability_loss_rate(&s).unwrap()[6000];
        let c = |t: f64| 1.0 / (1.0 + (4.0 * t).exp()).sqrt();
        let h = 1e-4;
        let fd = -2.0 * (c(h).ln() - c(-h).ln()) / (2.0 * h);
        assert!((rate - fd).abs() < 1e-6, "{rate} {fd}");
    }

    #[test]
    fn matched_schedules_satisfy_classical_condition() {
        let p = SystemParams::from_dimensionless(4.0, 30.0, 1.0, 0.0, 1, 1.0).unwrap();
        let g = TimeGrid::new(-8.0, 8.0, 4001).unwrap();
        let pulse = make_sech(g, 1.0, 0.0).unwrap();
        let s = sech_matched_cos_theta(&p, g).unwrap();
        let res = schedule_matching_residual(&p, &s, pulse.waveform()).unwrap();
        assert!(res.max_abs() < 1e-6, "{}", res.max_abs());
        assert!(res.evaluated() > 3900);

        let solved = solve_impedance_matching(&p, &pulse, default_cos_theta_start(&p)).unwrap();
        let res = schedule_matching_residual(&p, &solved, pulse.waveform()).unwrap();
        assert!(res.max_abs() < 1e-6, "{}", res.max_abs());

        let mut off = s.clone();
        off.cos_theta.iter_mut().for_each(|c| *c *= 1.01);
        let res = schedule_matching_residual(&p, &off, pulse.waveform()).unwrap();
        for (r, c) in res.residual.iter().zip(&s.cos_theta) {
            if let Some(r) = r {
                let shift = 0.5 * p.gamma * 0.0201 * c * c;
                assert!((r + shift).abs() < 1e-6);
                if shift > 1e-6 {
                    assert!(*r < 0.0);
                }
            }
        }
    }

    #[test]
    fn zero_crossing_is_singular() {
        let g = TimeGrid::new(-1.0, 1.0, 101).unwrap();
        let values = g.times().iter().map(|t| Complex64::new(*t, 0.0)).collect();
        let w = Waveform { grid: g, values };
        let r = generalized_matching_residual(1.0, &w, &[1.0; 101], &[0.0; 101]);
        assert!(matches!(r, Err(Error::SingularEnvelope { .. })));
    }
}
