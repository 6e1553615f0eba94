//! Input wave-packet envelopes `phi(t)` sampled on a time grid.
//!
//! `phi` is the free-field envelope at the input mirror scaled so that
//! `sum |phi_i|^2 dt = 1` for a single photon. Every constructor normalizes
//! numerically; the closed-form constants of the analytic families are only
//! used as cross-checks in the tests.

use std::io::Read;
use std::path::Path;

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;

/// Relative amplitude the envelope may keep at the grid edges.
pub const EDGE_TOLERANCE: f64 = 1e-6;

/// Half-width, in units of `T`, an analytic pulse needs around its center.
pub const MIN_HALF_SPAN: f64 = 6.0;

/// A complex signal sampled on a grid, with no normalization constraint.
#[derive(Debug, Clone, PartialEq)]
pub struct Waveform {
    pub grid: TimeGrid,
    pub values: Vec<Complex64>,
}

impl Waveform {
    pub fn new(grid: TimeGrid, values: Vec<Complex64>) -> Result<Self> {
        if values.len() != grid.len() {
            return Err(Error::GridMismatch(format!(
                "{} samples for a grid of {} points",
                values.len(),
                grid.len()
            )));
        }
        Ok(Self { grid, values })
    }

    pub fn zeros(grid: TimeGrid) -> Self {
        Self { grid, values: vec![Complex64::new(0.0, 0.0); grid.len()] }
    }

    /// Photon number `sum |phi|^2 dt`.
    pub fn energy(&self) -> f64 {
        self.values.iter().map(|v| v.norm_sqr()).sum::<f64>() * self.grid.dt()
    }

    /// `<self|other> = sum conj(self) other dt` on a shared grid.
    pub fn overlap(&self, other: &Waveform) -> Result<Complex64> {
        self.grid.ensure_matches(&other.grid, "overlap")?;
        Ok(self.values.iter().zip(&other.values).map(|(a, b)| a.conj() * b).sum::<Complex64>()
            * self.grid.dt())
    }

    pub fn max_abs(&self) -> f64 {
        self.values.iter().map(|v| v.norm()).fold(0.0, f64::max)
    }

    /// Time of the largest `|phi|`.
    pub fn peak_time(&self) -> f64 {
        let (i, _) = self
            .values
            .iter()
            .enumerate()
            .fold((0, -1.0), |best, (i, v)| if v.norm() > best.1 { (i, v.norm()) } else { best });
        self.grid.time(i)
    }

    pub fn scaled(&self, factor: Complex64) -> Self {
        Self { grid: self.grid, values: self.values.iter().map(|v| v * factor).collect() }
    }

    /// Largest `|Im phi| / max|phi|`.
    pub fn imaginary_fraction(&self) -> f64 {
        let max = self.max_abs();
        if max == 0.0 {
            return 0.0;
        }
        self.values.iter().map(|v| v.im.abs()).fold(0.0, f64::max) / max
    }

    /// `int_{t_0}^{t_i} |phi|^2`, left Riemann sums matching [`Waveform::energy`].
    pub fn cumulative_energy(&self) -> Vec<f64> {
        let dt = self.grid.dt();
        let mut acc = 0.0;
        self.values
            .iter()
            .map(|v| {
                acc += v.norm_sqr() * dt;
                acc
            })
            .collect()
    }
}

/// Which closed form produced an envelope.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PulseFamily {
    /// `sech(2(t - delay)/T)`
    Sech,
    /// `exp(-(t - delay)^2 / T^2)`
    Gaussian,
    /// `exp(-(t - delay)^4 / T^4)`
    HyperGaussian,
    Custom,
}

impl PulseFamily {
    pub fn name(&self) -> &'static str {
        match self {
            PulseFamily::Sech => "sech",
            PulseFamily::Gaussian => "gaussian",
            PulseFamily::HyperGaussian => "hyper_gaussian",
            PulseFamily::Custom => "custom",
        }
    }

    /// Unnormalized profile at `x = (t - delay) / T`.
    pub fn profile(&self, x: f64) -> Option<f64> {
        match self {
            PulseFamily::Sech => Some(1.0 / (2.0 * x).cosh()),
            PulseFamily::Gaussian => Some((-x * x).exp()),
            PulseFamily::HyperGaussian => Some((-(x * x) * (x * x)).exp()),
            PulseFamily::Custom => None,
        }
    }
}

impl std::str::FromStr for PulseFamily {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sech" => Ok(PulseFamily::Sech),
            "gaussian" => Ok(PulseFamily::Gaussian),
            "hyper_gaussian" | "hyper-gaussian" => Ok(PulseFamily::HyperGaussian),
            "custom" => Ok(PulseFamily::Custom),
            other => Err(Error::Parse(format!("unknown pulse family '{other}'"))),
        }
    }
}

/// A normalized single-photon input envelope.
#[derive(Debug, Clone, PartialEq)]
pub struct PulseEnvelope {
    waveform: Waveform,
    pub family: PulseFamily,
    /// Characteristic duration `T`.
    pub t_pulse: f64,
    /// Arrival-time offset of the packet center.
    pub delay: f64,
}

impl PulseEnvelope {
    /// Wraps arbitrary samples, renormalizing to unit photon number.
    pub fn custom(grid: TimeGrid, values: Vec<Complex64>, t_pulse: f64) -> Result<Self> {
        let waveform = Waveform::new(grid, values)?;
        let peak = waveform.peak_time();
        Self::finish(waveform, PulseFamily::Custom, t_pulse, peak)
    }

    pub fn grid(&self) -> &TimeGrid {
        &self.waveform.grid
    }

    pub fn values(&self) -> &[Complex64] {
        &self.waveform.values
    }

    pub fn waveform(&self) -> &Waveform {
        &self.waveform
    }

    pub fn into_waveform(self) -> Waveform {
        self.waveform
    }

    fn finish(mut waveform: Waveform, family: PulseFamily, t_pulse: f64, delay: f64) -> Result<Self> {
        let energy = waveform.energy();
        if !(energy > 0.0) || !energy.is_finite() {
            return Err(Error::Domain(format!("envelope has no finite energy ({energy})")));
        }
        let scale = 1.0 / energy.sqrt();
        waveform.values.iter_mut().for_each(|v| *v *= scale);
        let max = waveform.max_abs();
        let first = waveform.values[0].norm();
        let last = waveform.values[waveform.values.len() - 1].norm();
        if first >= EDGE_TOLERANCE * max || last >= EDGE_TOLERANCE * max {
            return Err(Error::Truncation(format!(
                "envelope not contained in [{}, {}]: edge amplitudes {:.2e}, {:.2e} of the peak",
                waveform.grid.t_start(),
                waveform.grid.t_end(),
                first / max,
                last / max
            )));
        }
        Ok(Self { waveform, family, t_pulse, delay })
    }
}

fn make_analytic(grid: TimeGrid, family: PulseFamily, t_pulse: f64, delay: f64) -> Result<PulseEnvelope> {
    if !(t_pulse > 0.0) {
        return Err(Error::Domain(format!("pulse duration must be > 0, got {t_pulse}")));
    }
    let half = MIN_HALF_SPAN * t_pulse;
    if grid.t_start() > delay - half || grid.t_end() < delay + half {
        return Err(Error::Truncation(format!(
            "grid [{}, {}] does not span [{}, {}] around the pulse center",
            grid.t_start(),
            grid.t_end(),
            delay - half,
            delay + half
        )));
    }
    let values = grid
        .times()
        .into_iter()
        .map(|t| Complex64::new(family.profile((t - delay) / t_pulse).unwrap_or(0.0), 0.0))
        .collect();
    PulseEnvelope::finish(Waveform { grid, values }, family, t_pulse, delay)
}

pub fn make_sech(grid: TimeGrid, t_pulse: f64, delay: f64) -> Result<PulseEnvelope> {
    make_analytic(grid, PulseFamily::Sech, t_pulse, delay)
}

pub fn make_gaussian(grid: TimeGrid, t_pulse: f64, delay: f64) -> Result<PulseEnvelope> {
    make_analytic(grid, PulseFamily::Gaussian, t_pulse, delay)
}

pub fn make_hyper_gaussian(grid: TimeGrid, t_pulse: f64, delay: f64) -> Result<PulseEnvelope> {
    make_analytic(grid, PulseFamily::HyperGaussian, t_pulse, delay)
}

pub fn make_pulse(family: PulseFamily, grid: TimeGrid, t_pulse: f64, delay: f64) -> Result<PulseEnvelope> {
    match family {
        PulseFamily::Custom => Err(Error::Domain("custom envelopes are built from samples".into())),
        f => make_analytic(grid, f, t_pulse, delay),
    }
}

/// `phi'(t) = phi(t - delta_t)`.
///
/// Analytic families are re-evaluated from their closed form; custom
/// envelopes are shifted band-limited, by a linear spectral phase.
pub fn shift(pulse: &PulseEnvelope, delta_t: f64) -> Result<PulseEnvelope> {
    if delta_t == 0.0 {
        return Ok(pulse.clone());
    }
    match pulse.family {
        PulseFamily::Custom => {
            let n = pulse.values().len();
            let dt = pulse.grid().dt();
            let mut buf = pulse.values().to_vec();
            let mut planner = FftPlanner::new();
            planner.plan_fft_forward(n).process(&mut buf);
            let span = n as f64 * dt;
            for (k, v) in buf.iter_mut().enumerate() {
                let kk = if k <= n / 2 { k as f64 } else { k as f64 - n as f64 };
                let omega = 2.0 * std::f64::consts::PI * kk / span;
                *v *= Complex64::from_polar(1.0 / n as f64, -omega * delta_t);
            }
            planner.plan_fft_inverse(n).process(&mut buf);
            let waveform = Waveform { grid: *pulse.grid(), values: buf };
            PulseEnvelope::finish(waveform, PulseFamily::Custom, pulse.t_pulse, pulse.delay + delta_t)
        }
        family => make_analytic(*pulse.grid(), family, pulse.t_pulse, pulse.delay + delta_t),
    }
}

/// Reads a custom envelope from CSV: a header line, then `t, Re phi` and
/// optionally `Im phi` per row. Times must be uniformly spaced.
pub fn read_envelope_csv<R: Read>(reader: R, t_pulse: f64) -> Result<PulseEnvelope> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let mut times = Vec::new();
    let mut values = Vec::new();
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() < 2 || record.len() > 3 {
            return Err(Error::Parse(format!("row {}: expected 2 or 3 columns, got {}", row + 1, record.len())));
        }
        let field = |j: usize| -> Result<f64> {
            record[j]
                .parse::<f64>()
                .map_err(|e| Error::Parse(format!("row {}, column {}: {e}", row + 1, j + 1)))
        };
        times.push(field(0)?);
        let im = if record.len() == 3 { field(2)? } else { 0.0 };
        values.push(Complex64::new(field(1)?, im));
    }
    let grid = grid_from_times(&times)?;
    PulseEnvelope::custom(grid, values, t_pulse)
}

pub fn load_envelope_csv(path: &Path, t_pulse: f64) -> Result<PulseEnvelope> {
    let file = std::fs::File::open(path)?;
    read_envelope_csv(file, t_pulse)
}

/// Recovers a uniform grid from sample times.
pub(crate) fn grid_from_times(times: &[f64]) -> Result<TimeGrid> {
    if times.len() < 2 {
        return Err(Error::Parse(format!("need at least 2 samples, got {}", times.len())));
    }
    let grid = TimeGrid::new(times[0], times[times.len() - 1], times.len())?;
    let tol = 1e-6 * grid.dt();
    for (i, t) in times.iter().enumerate() {
        if (t - grid.time(i)).abs() > tol {
            return Err(Error::Parse(format!("sample times are not uniform (row {})", i + 1)));
        }
    }
    Ok(grid)
}
