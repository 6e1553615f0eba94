//! Unreduced single-excitation dynamics: excited collective state `a`,
//! cavity photon `b`, collective spin `c` and a discretized continuum of
//! free-field modes `xi_k`,
//!
//! ```text
//! da/dt    = -(gamma_a/2) a - i g sqrt(N) b - i Omega c
//! db/dt    = -i g sqrt(N) a - i kappa sum_k xi_k
//! dc/dt    = -(gamma_c/2) c - i Omega a
//! dxi_k/dt = -i Delta_k xi_k - i kappa b
//! ```
//!
//! The mode equations are integrated in the rotating frame of each mode,
//! `eta_k = xi_k exp(i Delta_k (t - t_ref))`, which removes the fast free
//! evolution:
//!
//! ```text
//! db/dt     = -i g sqrt(N) a - i kappa sum_k eta_k exp(-i Delta_k (t - t_ref))
//! deta_k/dt = -i kappa b exp(i Delta_k (t - t_ref))
//! ```
//!
//! With `kappa^2 2 pi / dDelta = gamma` the bank reproduces the Markov decay
//! `db/dt = ... - i sqrt(gamma) phi_in - (gamma/2) b` and the output relation
//! `phi_out = phi_in - i sqrt(gamma) b`.

use std::f64::consts::TAU;
use std::io::Write;

use num_complex::Complex64;

use crate::control::ControlSchedule;
use crate::error::{Error, Result};
use crate::export::sci;
use crate::grid::{interpolate, TimeGrid};
use crate::model::{mixing_angle_from_omega, rotate_pair, SystemParams};
use crate::pulses::{PulseEnvelope, Waveform};

/// Default bank: `Delta_max = max(40/T, 40 gamma)`, 1024 modes.
pub const DEFAULT_MODES: usize = 1024;
pub const DEFAULT_SPAN_FACTOR: f64 = 40.0;
pub const DEFAULT_LINEWIDTH_FACTOR: f64 = 40.0;

/// Target phase advance per step for the automatic step size.
const STEP_PHASE: f64 = 0.05;
const MAX_TOTAL_STEPS: usize = 20_000_000;

/// Uniform, symmetric grid of free-field detunings.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeBank {
    pub detunings: Vec<f64>,
    pub kappa: f64,
    pub delta_max: f64,
    pub spacing: f64,
    pub gamma: f64,
}

impl ModeBank {
    /// `n_modes` detunings spanning `[-delta_max, delta_max]`, coupled with
    /// `kappa = sqrt(gamma dDelta / 2 pi)`.
    pub fn new(gamma: f64, delta_max: f64, n_modes: usize) -> Result<Self> {
        if !(gamma > 0.0) || !gamma.is_finite() {
            return Err(Error::InvalidParams(format!("mode bank needs gamma > 0, got {gamma}")));
        }
        if !(delta_max > 0.0) || !delta_max.is_finite() || n_modes < 2 {
            return Err(Error::InvalidParams(format!(
                "mode bank needs delta_max > 0 and at least 2 modes, got {delta_max}, {n_modes}"
            )));
        }
        let spacing = 2.0 * delta_max / (n_modes - 1) as f64;
        let detunings = (0..n_modes).map(|k| -delta_max + k as f64 * spacing).collect();
        Ok(Self { detunings, kappa: (gamma * spacing / TAU).sqrt(), delta_max, spacing, gamma })
    }

    /// Default bank for `params`: `Delta_max = max(40/T, 40 gamma)`, 1024 modes.
    ///
    /// Truncating the band at `Delta_max` raises the cavity decay rate to
    /// `gamma (1 + (2/pi) atan(gamma / (2 Delta_max)))`; at `40 gamma` that
    /// is below 1%.
    pub fn for_params(params: &SystemParams) -> Result<Self> {
        let span = (DEFAULT_SPAN_FACTOR / params.t_pulse).max(DEFAULT_LINEWIDTH_FACTOR * params.gamma);
        Self::new(params.gamma, span, DEFAULT_MODES)
    }

    pub fn len(&self) -> usize {
        self.detunings.len()
    }

    pub fn is_empty(&self) -> bool {
        self.detunings.is_empty()
    }

    /// Poincare recurrence time `2 pi / dDelta`.
    pub fn recurrence_time(&self) -> f64 {
        TAU / self.spacing
    }

    /// Decay rate of the empty cavity coupled to this truncated band, the
    /// root of `G = gamma (1 + (2/pi) atan(G / (2 Delta_max)))`.
    pub fn truncated_decay_rate(&self) -> f64 {
        let mut rate = self.gamma;
        for _ in 0..50 {
            rate = self.gamma * (1.0 + std::f64::consts::FRAC_2_PI * (rate / (2.0 * self.delta_max)).atan());
        }
        rate
    }

    /// `Delta_max >= 20/T` and `Delta_max >= 10 gamma`.
    pub fn check_coverage(&self, params: &SystemParams) -> Result<()> {
        let need = (20.0 / params.t_pulse).max(10.0 * params.gamma);
        if self.delta_max < need {
            return Err(Error::Bandwidth {
                message: format!("delta_max = {} below max(20/T, 10 gamma) = {need}", self.delta_max),
                leakage: f64::NAN,
            });
        }
        if (self.gamma - params.gamma).abs() > 1e-12 * params.gamma {
            return Err(Error::InvalidParams(format!(
                "mode bank built for gamma = {}, parameters have {}",
                self.gamma, params.gamma
            )));
        }
        Ok(())
    }
}

/// Mode amplitudes in the rotating frame referenced to `t_ref`.
#[derive(Debug, Clone, PartialEq)]
pub struct ModeAmplitudes {
    pub t_ref: f64,
    pub values: Vec<Complex64>,
}

impl ModeAmplitudes {
    pub fn vacuum(bank: &ModeBank, t_ref: f64) -> Self {
        Self { t_ref, values: vec![Complex64::new(0.0, 0.0); bank.len()] }
    }

    pub fn photon_number(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum()
    }
}

/// `xi_k(t_0) = sqrt(dDelta / 2 pi) sum_j phi_j exp(i Delta_k (t_j - t_0)) dt`
/// with `t_0` the first sample of the pulse grid.
pub fn encode_input_modes(pulse: &PulseEnvelope, bank: &ModeBank) -> Result<ModeAmplitudes> {
    let bandwidth = 1.0 / pulse.t_pulse;
    let grid = pulse.grid();
    let t0 = grid.t_start();
    let dt = grid.dt();
    let times = grid.times();
    let norm = (bank.spacing / TAU).sqrt() * dt;
    let values: Vec<Complex64> = bank
        .detunings
        .iter()
        .map(|&d| {
            let step = Complex64::from_polar(1.0, d * dt);
            let mut phase = Complex64::new(1.0, 0.0);
            let mut acc = Complex64::new(0.0, 0.0);
            for (j, v) in pulse.values().iter().enumerate() {
                if j % 256 == 0 {
                    phase = Complex64::from_polar(1.0, d * (times[j] - t0));
                }
                acc += v * phase;
                phase *= step;
            }
            acc * norm
        })
        .collect();
    let modes = ModeAmplitudes { t_ref: t0, values };
    let leakage = (pulse.waveform().energy() - modes.photon_number()).abs();
    if bandwidth >= bank.delta_max / 4.0 {
        return Err(Error::Bandwidth {
            message: format!("pulse bandwidth 1/T = {bandwidth} not below delta_max/4 = {}", bank.delta_max / 4.0),
            leakage,
        });
    }
    if leakage > 1e-6 {
        return Err(Error::Bandwidth { message: "mode bank does not hold the pulse spectrum".into(), leakage });
    }
    if grid.span() >= bank.recurrence_time() {
        return Err(Error::Bandwidth {
            message: format!(
                "pulse window {} exceeds the bank recurrence time {}",
                grid.span(),
                bank.recurrence_time()
            ),
            leakage,
        });
    }
    Ok(modes)
}

/// Field at `z = 0`, `sqrt(dDelta / 2 pi) sum_k eta_k exp(-i Delta_k (t - t_ref))`,
/// sampled on `grid`.
pub fn synthesize_field(bank: &ModeBank, modes: &ModeAmplitudes, grid: TimeGrid) -> Waveform {
    let norm = (bank.spacing / TAU).sqrt();
    let values = grid
        .times()
        .iter()
        .map(|t| {
            let tau = t - modes.t_ref;
            let step = Complex64::from_polar(1.0, -bank.spacing * tau);
            let mut phase = Complex64::from_polar(1.0, -bank.detunings[0] * tau);
            let mut acc = Complex64::new(0.0, 0.0);
            for (k, eta) in modes.values.iter().enumerate() {
                if k % 128 == 0 {
                    phase = Complex64::from_polar(1.0, -bank.detunings[k] * tau);
                }
                acc += eta * phase;
                phase *= step;
            }
            acc * norm
        })
        .collect();
    Waveform { grid, values }
}

/// Options of [`integrate_full`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FullOptions {
    /// RK4 steps per grid interval; chosen from the fastest rate when `None`.
    pub substeps: Option<usize>,
    /// Repeat the run at half the step and fail on a difference above
    /// `halving_tolerance`.
    pub verify_step_halving: bool,
    pub halving_tolerance: f64,
    /// Store the mode amplitudes at every n-th grid point.
    pub snapshot_every: usize,
}

impl Default for FullOptions {
    fn default() -> Self {
        Self { substeps: None, verify_step_halving: true, halving_tolerance: 1e-6, snapshot_every: 16 }
    }
}

/// Trajectory of the unreduced model on the schedule grid.
#[derive(Debug, Clone, PartialEq)]
pub struct FullTrajectory {
    pub grid: TimeGrid,
    pub a: Vec<Complex64>,
    pub b: Vec<Complex64>,
    pub c: Vec<Complex64>,
    /// `D = i(-cos b + sin c)`; the reduced amplitude up to a sign.
    pub dark: Vec<Complex64>,
    pub bright: Vec<Complex64>,
    pub population: Vec<f64>,
    /// `|a|^2 + |b|^2 + |c|^2 + sum |xi_k|^2`.
    pub norm: Vec<f64>,
    pub snapshot_indices: Vec<usize>,
    pub snapshots: Vec<Vec<Complex64>>,
    pub final_modes: ModeAmplitudes,
    pub substeps: usize,
    pub step_halving_error: Option<f64>,
    /// `min_t Omega / (g sqrt(<n>))` over samples with a photon present.
    pub drive_ratio: f64,
}

impl FullTrajectory {
    pub fn max_norm_drift(&self) -> f64 {
        let n0 = self.norm[0];
        self.norm.iter().map(|n| (n - n0).abs()).fold(0.0, f64::max)
    }

    /// Excitation left in the cavity and the ensemble at the end.
    pub fn residual_excitation(&self) -> f64 {
        let i = self.a.len() - 1;
        self.a[i].norm_sqr() + self.b[i].norm_sqr() + self.c[i].norm_sqr()
    }
}

#[derive(Clone, Copy)]
struct Coefficients {
    g_collective: f64,
    g_single: f64,
    half_gamma_a: f64,
    half_gamma_c: f64,
}

struct Raw {
    a: Vec<Complex64>,
    b: Vec<Complex64>,
    c: Vec<Complex64>,
    norm: Vec<f64>,
    snapshot_indices: Vec<usize>,
    snapshots: Vec<Vec<Complex64>>,
    final_modes: Vec<Complex64>,
}

fn propagate(
    coef: Coefficients,
    bank: &ModeBank,
    grid: TimeGrid,
    omega: &[f64],
    init: (Complex64, Complex64, Complex64),
    modes: &ModeAmplitudes,
    substeps: usize,
    snapshot_every: usize,
) -> Raw {
    let n = grid.len();
    let nk = bank.len();
    let h = grid.dt() / substeps as f64;
    let kappa = bank.kappa;
    let mi = Complex64::new(0.0, -1.0);
    let half_rot: Vec<Complex64> = bank.detunings.iter().map(|d| Complex64::from_polar(1.0, d * h / 2.0)).collect();
    // sum_k exp(-i Delta_k h/2)
    let dirichlet: Complex64 = half_rot.iter().map(|r| r.conj()).sum();
    let nk_f = nk as f64;

    let (mut a, mut b, mut c) = init;
    let mut eta = modes.values.clone();
    let mut phase = vec![Complex64::new(0.0, 0.0); nk];
    let mut out = Raw {
        a: Vec::with_capacity(n),
        b: Vec::with_capacity(n),
        c: Vec::with_capacity(n),
        norm: Vec::with_capacity(n),
        snapshot_indices: Vec::new(),
        snapshots: Vec::new(),
        final_modes: Vec::new(),
    };
    let every = snapshot_every.max(1);
    let record = |out: &mut Raw, i: usize, a: Complex64, b: Complex64, c: Complex64, eta: &[Complex64]| {
        out.a.push(a);
        out.b.push(b);
        out.c.push(c);
        out.norm.push(a.norm_sqr() + b.norm_sqr() + c.norm_sqr() + eta.iter().map(|e| e.norm_sqr()).sum::<f64>());
        if i.is_multiple_of(every) {
            out.snapshot_indices.push(i);
            out.snapshots.push(eta.to_vec());
        }
    };
    record(&mut out, 0, a, b, c, &eta);
    let deriv = |a: Complex64, b: Complex64, c: Complex64, w: f64, s: Complex64| {
        let da = -a * coef.half_gamma_a + mi * (b * coef.g_collective + c * w);
        let db = mi * (a * coef.g_collective + s * kappa);
        let dc = -c * coef.half_gamma_c + mi * a * w;
        (da, db, dc)
    };
    let _ = coef.g_single;

    for i in 0..n - 1 {
        let t_i = grid.time(i);
        for (p, d) in phase.iter_mut().zip(&bank.detunings) {
            *p = Complex64::from_polar(1.0, d * (t_i - modes.t_ref));
        }
        for s in 0..substeps {
            let frac = |x: f64| (s as f64 + x) / substeps as f64;
            let w0 = interpolate(omega, i, frac(0.0));
            let w1 = interpolate(omega, i, frac(0.5));
            let w2 = interpolate(omega, i, frac(1.0));
            let (mut s0, mut sh, mut sf) = (Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0), Complex64::new(0.0, 0.0));
            for k in 0..nk {
                let p = phase[k];
                let ph = p * half_rot[k];
                let pf = ph * half_rot[k];
                let e = eta[k];
                s0 += e * p.conj();
                sh += e * ph.conj();
                sf += e * pf.conj();
            }
            let (ka1, kb1, kc1) = deriv(a, b, c, w0, s0);
            let sum2 = sh + mi * kappa * b * dirichlet * (h / 2.0);
            let b2 = b + kb1 * (h / 2.0);
            let (ka2, kb2, kc2) = deriv(a + ka1 * (h / 2.0), b2, c + kc1 * (h / 2.0), w1, sum2);
            let sum3 = sh + mi * kappa * b2 * nk_f * (h / 2.0);
            let b3 = b + kb2 * (h / 2.0);
            let (ka3, kb3, kc3) = deriv(a + ka2 * (h / 2.0), b3, c + kc2 * (h / 2.0), w1, sum3);
            let sum4 = sf + mi * kappa * b3 * dirichlet * h;
            let b4 = b + kb3 * h;
            let (ka4, kb4, kc4) = deriv(a + ka3 * h, b4, c + kc3 * h, w2, sum4);
            // eta stages: k_j = -i kappa b_j exp(i Delta_k t_j)
            let wb = mi * kappa * (h / 6.0);
            for k in 0..nk {
                let p = phase[k];
                let ph = p * half_rot[k];
                let pf = ph * half_rot[k];
                eta[k] += wb * (b * p + (b2 + b3) * ph * 2.0 + b4 * pf);
                phase[k] = pf;
            }
            a += (ka1 + (ka2 + ka3) * 2.0 + ka4) * (h / 6.0);
            b += (kb1 + (kb2 + kb3) * 2.0 + kb4) * (h / 6.0);
            c += (kc1 + (kc2 + kc3) * 2.0 + kc4) * (h / 6.0);
        }
        record(&mut out, i + 1, a, b, c, &eta);
    }
    if out.snapshot_indices.last() != Some(&(n - 1)) {
        out.snapshot_indices.push(n - 1);
        out.snapshots.push(eta.clone());
    }
    out.final_modes = eta;
    out
}

fn auto_substeps(grid: TimeGrid, rate: f64) -> Result<usize> {
    let dt = grid.dt();
    let s = ((dt * rate / STEP_PHASE).ceil() as usize).max(1);
    if s.saturating_mul(grid.len()) > MAX_TOTAL_STEPS {
        return Err(Error::Domain(format!(
            "fastest rate {rate:.3e} needs {s} steps per interval; saturate the drive first"
        )));
    }
    Ok(s)
}

fn run_checked(
    coef: Coefficients,
    bank: &ModeBank,
    grid: TimeGrid,
    omega: &[f64],
    init: (Complex64, Complex64, Complex64),
    modes: &ModeAmplitudes,
    fastest: f64,
    options: &FullOptions,
) -> Result<(Raw, usize, Option<f64>)> {
    let substeps = match options.substeps {
        Some(s) => s.max(1),
        None => auto_substeps(grid, fastest)?,
    };
    let raw = propagate(coef, bank, grid, omega, init, modes, substeps, options.snapshot_every);
    if !options.verify_step_halving {
        return Ok((raw, substeps, None));
    }
    let fine = propagate(coef, bank, grid, omega, init, modes, 2 * substeps, usize::MAX);
    let diff = (0..raw.a.len())
        .map(|i| {
            (raw.a[i] - fine.a[i]).norm().max((raw.b[i] - fine.b[i]).norm()).max((raw.c[i] - fine.c[i]).norm())
        })
        .fold(0.0, |m: f64, d| if d.is_nan() { d } else { m.max(d) });
    if !(diff <= options.halving_tolerance) {
        return Err(Error::NumericConvergence(format!(
            "full model: halving the step changes the amplitudes by {diff:.3e} (substeps {substeps})"
        )));
    }
    Ok((raw, substeps, Some(diff)))
}

/// Integrates the full model from the given mode amplitudes with the
/// ensemble and cavity empty, on the schedule grid.
pub fn integrate_full(
    params: &SystemParams,
    bank: &ModeBank,
    initial: &ModeAmplitudes,
    schedule: &ControlSchedule,
    options: &FullOptions,
) -> Result<FullTrajectory> {
    let zero = Complex64::new(0.0, 0.0);
    integrate_full_from(params, bank, initial, (zero, zero, zero), schedule, options)
}

/// As [`integrate_full`], from arbitrary `(a, b, c)`.
pub fn integrate_full_from(
    params: &SystemParams,
    bank: &ModeBank,
    initial: &ModeAmplitudes,
    amplitudes: (Complex64, Complex64, Complex64),
    schedule: &ControlSchedule,
    options: &FullOptions,
) -> Result<FullTrajectory> {
    params.validate()?;
    bank.check_coverage(params)?;
    if initial.values.len() != bank.len() {
        return Err(Error::GridMismatch(format!("{} mode amplitudes for {} modes", initial.values.len(), bank.len())));
    }
    if (initial.t_ref - schedule.grid.t_start()).abs() > 1e-9 * schedule.grid.span() {
        return Err(Error::GridMismatch(format!(
            "modes referenced to t = {}, schedule starts at {}",
            initial.t_ref,
            schedule.grid.t_start()
        )));
    }
    if schedule.grid.span() >= bank.recurrence_time() {
        return Err(Error::Domain(format!(
            "horizon {} reaches the bank recurrence time {}",
            schedule.grid.span(),
            bank.recurrence_time()
        )));
    }
    let max_omega = schedule.omega.iter().fold(0.0f64, |m, w| m.max(*w));
    if !max_omega.is_finite() {
        return Err(Error::Domain("drive must be finite; apply a cap".into()));
    }
    let gc = params.collective_coupling();
    let coef = Coefficients {
        g_collective: gc,
        g_single: params.g,
        half_gamma_a: 0.5 * params.gamma_a,
        half_gamma_c: 0.5 * params.gamma_c,
    };
    let fastest = max_omega
        .hypot(gc)
        .max(bank.delta_max)
        .max(params.gamma)
        .max(params.gamma_a)
        .max(params.gamma_c);
    let (raw, substeps, halving) =
        run_checked(coef, bank, schedule.grid, &schedule.omega, amplitudes, initial, fastest, options)?;

    let mut dark = Vec::with_capacity(raw.a.len());
    let mut bright = Vec::with_capacity(raw.a.len());
    let mut drive_ratio = f64::INFINITY;
    for i in 0..raw.a.len() {
        let angle = mixing_angle_from_omega(params, schedule.omega[i])?;
        let (d, bb) = rotate_pair(raw.b[i], raw.c[i], angle.cos_theta, angle.sin_theta);
        dark.push(d);
        bright.push(bb);
        let photons = raw.b[i].norm_sqr();
        if photons > 1e-12 {
            drive_ratio = drive_ratio.min(schedule.omega[i] / (params.g * photons.sqrt()));
        }
    }
    Ok(FullTrajectory {
        grid: schedule.grid,
        population: dark.iter().map(|d| d.norm_sqr()).collect(),
        dark,
        bright,
        a: raw.a,
        b: raw.b,
        c: raw.c,
        norm: raw.norm,
        snapshot_indices: raw.snapshot_indices,
        snapshots: raw.snapshots,
        final_modes: ModeAmplitudes { t_ref: initial.t_ref, values: raw.final_modes },
        substeps,
        step_halving_error: halving,
        drive_ratio,
    })
}

/// Empty cavity (`g = 0`, `Omega = 0`) coupled to the bank, starting from
/// cavity amplitude `b0` and the given modes.
pub fn integrate_bare_cavity(
    bank: &ModeBank,
    initial: &ModeAmplitudes,
    b0: Complex64,
    grid: TimeGrid,
    options: &FullOptions,
) -> Result<FullTrajectory> {
    if (initial.t_ref - grid.t_start()).abs() > 1e-9 * grid.span() {
        return Err(Error::GridMismatch("modes must be referenced to the grid start".into()));
    }
    let coef = Coefficients { g_collective: 0.0, g_single: 0.0, half_gamma_a: 0.0, half_gamma_c: 0.0 };
    let zero = Complex64::new(0.0, 0.0);
    let omega = vec![0.0; grid.len()];
    let fastest = bank.delta_max.max(bank.gamma);
    let (raw, substeps, halving) = run_checked(coef, bank, grid, &omega, (zero, b0, zero), initial, fastest, options)?;
    let n = raw.a.len();
    Ok(FullTrajectory {
        grid,
        dark: vec![zero; n],
        bright: vec![zero; n],
        population: vec![0.0; n],
        a: raw.a,
        b: raw.b,
        c: raw.c,
        norm: raw.norm,
        snapshot_indices: raw.snapshot_indices,
        snapshots: raw.snapshots,
        final_modes: ModeAmplitudes { t_ref: initial.t_ref, values: raw.final_modes },
        substeps,
        step_halving_error: halving,
        drive_ratio: f64::INFINITY,
    })
}

/// Cavity-field decay rate fitted to `ln |b(t)|^2` over `[t_from, t_to]`.
pub fn fitted_decay_rate(traj: &FullTrajectory, t_from: f64, t_to: f64) -> Result<f64> {
    let (i0, i1) = (traj.grid.nearest_index(t_from), traj.grid.nearest_index(t_to));
    if i1 < i0 + 2 {
        return Err(Error::Domain("decay fit window needs at least three samples".into()));
    }
    let x: Vec<f64> = (i0..=i1).map(|i| traj.grid.time(i)).collect();
    let y: Vec<f64> = (i0..=i1).map(|i| traj.b[i].norm_sqr().ln()).collect();
    Ok(-crate::grid::linear_fit(&x, &y).0)
}

/// Radiated output reconstructed from the final mode amplitudes.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodedOutput {
    pub waveform: Waveform,
    /// `sum_k |xi_k(t_end)|^2`.
    pub photon_number: f64,
    /// `|a|^2 + |b|^2 + |c|^2` left at the end.
    pub residual: f64,
    pub warnings: Vec<String>,
}

/// Reconstructs `phi_out(t)` on `grid` from the final mode amplitudes.
pub fn decode_output(traj: &FullTrajectory, bank: &ModeBank, grid: TimeGrid) -> Result<DecodedOutput> {
    if traj.final_modes.values.len() != bank.len() {
        return Err(Error::GridMismatch("trajectory and bank disagree on the number of modes".into()));
    }
    let waveform = synthesize_field(bank, &traj.final_modes, grid);
    let residual = traj.residual_excitation();
    let mut warnings = Vec::new();
    if residual > 1e-3 {
        warnings.push(format!("excitation {residual:.3e} not yet radiated at the end of the run"));
    }
    Ok(DecodedOutput { waveform, photon_number: traj.final_modes.photon_number(), residual, warnings })
}

/// One recurrence period `[t_ref, t_ref + 2 pi/dDelta)` sampled at
/// `8 n_modes` points, where the discrete Parseval identity is exact.
pub fn recurrence_window(bank: &ModeBank, t_ref: f64) -> Result<TimeGrid> {
    let m = 8 * bank.len();
    let period = bank.recurrence_time();
    TimeGrid::with_spacing(t_ref, period / m as f64, m)
}

/// Writes `t, a, b, c, D, |D|^2, norm` (real and imaginary parts).
pub fn write_full_csv<W: Write>(mut out: W, traj: &FullTrajectory) -> Result<()> {
    writeln!(out, "t,a_re,a_im,b_re,b_im,c_re,c_im,D_re,D_im,population,norm")?;
    for (i, t) in traj.grid.times().iter().enumerate() {
        let (a, b, c, d) = (traj.a[i], traj.b[i], traj.c[i], traj.dark[i]);
        writeln!(
            out,
            "{},{},{},{},{},{},{},{},{},{},{}",
            sci(*t),
            sci(a.re),
            sci(a.im),
            sci(b.re),
            sci(b.im),
            sci(c.re),
            sci(c.im),
            sci(d.re),
            sci(d.im),
            sci(traj.population[i]),
            sci(traj.norm[i])
        )?;
    }
    Ok(())
}

/// Writes `delta, re, im, power` of the mode amplitudes.
pub fn write_spectrum_csv<W: Write>(mut out: W, bank: &ModeBank, modes: &ModeAmplitudes) -> Result<()> {
    writeln!(out, "delta,re,im,power")?;
    for (d, v) in bank.detunings.iter().zip(&modes.values) {
        writeln!(out, "{},{},{},{}", sci(*d), sci(v.re), sci(v.im), sci(v.norm_sqr()))?;
    }
    Ok(())
}
