//! Uniform time grids and the fixed-order numerical kernels shared by the
//! integrators: cubic interpolation between samples, fourth-order
//! cumulative quadrature and five-point differentiation.

use std::ops::{Add, Mul, Sub};

use crate::error::{Error, Result};

/// A uniform grid `t_start, t_start + dt, ..., t_end`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    t_start: f64,
    t_end: f64,
    n_points: usize,
}

impl TimeGrid {
    pub fn new(t_start: f64, t_end: f64, n_points: usize) -> Result<Self> {
        if !(t_start.is_finite() && t_end.is_finite()) || t_start >= t_end {
            return Err(Error::Domain(format!(
                "time grid needs t_start < t_end, got [{t_start}, {t_end}]"
            )));
        }
        if n_points < 2 {
            return Err(Error::Domain(format!(
                "time grid needs at least 2 points, got {n_points}"
            )));
        }
        Ok(Self { t_start, t_end, n_points })
    }

    /// Grid with spacing `dt` starting at `t_start`, `n_points` long.
    pub fn with_spacing(t_start: f64, dt: f64, n_points: usize) -> Result<Self> {
        if !(dt > 0.0) || n_points < 2 {
            return Err(Error::Domain(format!("invalid spacing {dt} or length {n_points}")));
        }
        Self::new(t_start, t_start + dt * (n_points - 1) as f64, n_points)
    }

    pub fn t_start(&self) -> f64 {
        self.t_start
    }

    pub fn t_end(&self) -> f64 {
        self.t_end
    }

    pub fn len(&self) -> usize {
        self.n_points
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn dt(&self) -> f64 {
        (self.t_end - self.t_start) / (self.n_points - 1) as f64
    }

    pub fn span(&self) -> f64 {
        self.t_end - self.t_start
    }

    pub fn time(&self, i: usize) -> f64 {
        if i + 1 == self.n_points {
            self.t_end
        } else {
            self.t_start + i as f64 * self.dt()
        }
    }

    pub fn times(&self) -> Vec<f64> {
        (0..self.n_points).map(|i| self.time(i)).collect()
    }

    /// Index of the sample closest to `t`, clamped to the grid.
    pub fn nearest_index(&self, t: f64) -> usize {
        let x = ((t - self.t_start) / self.dt()).round();
        x.clamp(0.0, (self.n_points - 1) as f64) as usize
    }

    /// Same grid with `factor` times as many intervals.
    pub fn refined(&self, factor: usize) -> Self {
        Self {
            t_start: self.t_start,
            t_end: self.t_end,
            n_points: (self.n_points - 1) * factor.max(1) + 1,
        }
    }

    /// True when both grids describe the same sample times.
    pub fn matches(&self, other: &TimeGrid) -> bool {
        let tol = 1e-9 * self.span().abs().max(1.0);
        self.n_points == other.n_points
            && (self.t_start - other.t_start).abs() <= tol
            && (self.t_end - other.t_end).abs() <= tol
    }

    pub fn ensure_matches(&self, other: &TimeGrid, what: &str) -> Result<()> {
        if self.matches(other) {
            Ok(())
        } else {
            Err(Error::GridMismatch(format!(
                "{what}: [{}, {}] x {} vs [{}, {}] x {}",
                self.t_start, self.t_end, self.n_points, other.t_start, other.t_end, other.n_points
            )))
        }
    }
}

/// Values that can be linearly combined with real weights.
pub trait Sample: Copy + Add<Output = Self> + Sub<Output = Self> + Mul<f64, Output = Self> {}

impl<T> Sample for T where T: Copy + Add<Output = T> + Sub<Output = T> + Mul<f64, Output = T> {}

/// Cubic Lagrange interpolation at `t_i + s*dt`, `s` in `[0, 1]`.
///
/// Uses the four samples `i-1..=i+2`, shifted inwards at the ends of the
/// array. Falls back to linear interpolation for fewer than four samples.
pub fn interpolate<T: Sample>(values: &[T], i: usize, s: f64) -> T {
    let n = values.len();
    if n < 4 {
        let j = i.min(n - 2);
        return values[j] * (1.0 - s) + values[j + 1] * s;
    }
    let j0 = if i == 0 { 0 } else if i + 2 >= n { n - 4 } else { i - 1 };
    let x = (i - j0) as f64 + s;
    let w0 = -(x - 1.0) * (x - 2.0) * (x - 3.0) / 6.0;
    let w1 = x * (x - 2.0) * (x - 3.0) / 2.0;
    let w2 = -x * (x - 1.0) * (x - 3.0) / 2.0;
    let w3 = x * (x - 1.0) * (x - 2.0) / 6.0;
    values[j0] * w0 + values[j0 + 1] * w1 + values[j0 + 2] * w2 + values[j0 + 3] * w3
}

/// Midpoint of interval `i`, the value RK4 needs at `t_i + dt/2`.
pub fn midpoint<T: Sample>(values: &[T], i: usize) -> T {
    let n = values.len();
    if n < 4 {
        return (values[i] + values[i + 1]) * 0.5;
    }
    if i == 0 {
        (values[0] * 5.0 + values[1] * 15.0 - values[2] * 5.0 + values[3]) * (1.0 / 16.0)
    } else if i + 2 >= n {
        (values[n - 1] * 5.0 + values[n - 2] * 15.0 - values[n - 3] * 5.0 + values[n - 4])
            * (1.0 / 16.0)
    } else {
        (values[i] * 9.0 + values[i + 1] * 9.0 - values[i - 1] - values[i + 2]) * (1.0 / 16.0)
    }
}

/// Integral of the cubic interpolant over interval `i` (length `dt`).
pub fn interval_integral<T: Sample>(values: &[T], i: usize, dt: f64) -> T {
    let n = values.len();
    if n < 4 {
        return (values[i] + values[i + 1]) * (0.5 * dt);
    }
    let w = dt / 24.0;
    if i == 0 {
        (values[0] * 9.0 + values[1] * 19.0 - values[2] * 5.0 + values[3]) * w
    } else if i + 2 >= n {
        (values[n - 1] * 9.0 + values[n - 2] * 19.0 - values[n - 3] * 5.0 + values[n - 4]) * w
    } else {
        (values[i] * 13.0 + values[i + 1] * 13.0 - values[i - 1] - values[i + 2]) * w
    }
}

/// Running integral `C_i = int_{t_0}^{t_i} f`, fourth order in `dt`.
pub fn cumulative_integral(values: &[f64], dt: f64) -> Vec<f64> {
    let mut out = Vec::with_capacity(values.len());
    let mut acc = 0.0;
    out.push(acc);
    for i in 0..values.len().saturating_sub(1) {
        acc += interval_integral(values, i, dt);
        out.push(acc);
    }
    out
}

/// Five-point finite-difference derivative (fourth order, one-sided at the
/// ends). Needs at least five samples; shorter arrays use central/one-sided
/// second-order differences.
pub fn derivative(values: &[f64], dt: f64) -> Vec<f64> {
    let n = values.len();
    if n < 5 {
        return (0..n)
            .map(|i| {
                if n < 2 {
                    0.0
                } else if i == 0 {
                    (values[1] - values[0]) / dt
                } else if i == n - 1 {
                    (values[n - 1] - values[n - 2]) / dt
                } else {
                    (values[i + 1] - values[i - 1]) / (2.0 * dt)
                }
            })
            .collect();
    }
    let f = values;
    let h12 = 12.0 * dt;
    (0..n)
        .map(|i| match i {
            0 => (-25.0 * f[0] + 48.0 * f[1] - 36.0 * f[2] + 16.0 * f[3] - 3.0 * f[4]) / h12,
            1 => (-3.0 * f[0] - 10.0 * f[1] + 18.0 * f[2] - 6.0 * f[3] + f[4]) / h12,
            _ if i == n - 1 => {
                (25.0 * f[n - 1] - 48.0 * f[n - 2] + 36.0 * f[n - 3] - 16.0 * f[n - 4]
                    + 3.0 * f[n - 5])
                    / h12
            }
            _ if i == n - 2 => {
                (3.0 * f[n - 1] + 10.0 * f[n - 2] - 18.0 * f[n - 3] + 6.0 * f[n - 4] - f[n - 5])
                    / h12
            }
            _ => (f[i - 2] - 8.0 * f[i - 1] + 8.0 * f[i + 1] - f[i + 2]) / h12,
        })
        .collect()
}

/// Least-squares slope and intercept of `y` against `x`.
pub fn linear_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let n = x.len() as f64;
    let mx = x.iter().sum::<f64>() / n;
    let my = y.iter().sum::<f64>() / n;
    let sxy: f64 = x.iter().zip(y).map(|(a, b)| (a - mx) * (b - my)).sum();
    let sxx: f64 = x.iter().map(|a| (a - mx) * (a - mx)).sum();
    let slope = sxy / sxx;
    (slope, my - slope * mx)
}

/// Fit `y = a * x^p` by linear regression in log-log space; returns `(a, p)`.
pub fn power_law_fit(x: &[f64], y: &[f64]) -> (f64, f64) {
    let lx: Vec<f64> = x.iter().map(|v| v.ln()).collect();
    let ly: Vec<f64> = y.iter().map(|v| v.ln()).collect();
    let (p, ln_a) = linear_fit(&lx, &ly);
    (ln_a.exp(), p)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn grid_rejects_bad_bounds() {
        assert!(TimeGrid::new(1.0, 1.0, 10).is_err());
        assert!(TimeGrid::new(0.0, 1.0, 1).is_err());
        let g = TimeGrid::new(-1.0, 1.0, 5).unwrap();
        assert_eq!(g.dt(), 0.5);
        assert_eq!(g.time(4), 1.0);
        assert_eq!(g.nearest_index(0.26), 3);
        assert_eq!(g.refined(2).len(), 9);
    }

    #[test]
    fn cubic_kernels_are_exact_on_cubics() {
        let dt = 0.1;
        let f = |t: f64| 1.0 - 2.0 * t + 0.5 * t * t - 0.3 * t * t * t;
        let big_f = |t: f64| t - t * t + t.powi(3) / 6.0 - 0.075 * t.powi(4);
        let vals: Vec<f64> = (0..10).map(|i| f(i as f64 * dt)).collect();
        for i in 0..9 {
            let t = i as f64 * dt;
            assert!((midpoint(&vals, i) - f(t + dt / 2.0)).abs() < 1e-13);
            assert!((interpolate(&vals, i, 0.3) - f(t + 0.3 * dt)).abs() < 1e-13);
            let exact = big_f(t + dt) - big_f(t);
            assert!((interval_integral(&vals, i, dt) - exact).abs() < 1e-14);
        }
    }

    #[test]
    fn derivative_is_exact_on_quartics() {
        let dt = 0.05;
        let vals: Vec<f64> = (0..20).map(|i| (i as f64 * dt).powi(4)).collect();
        let d = derivative(&vals, dt);
        for (i, v) in d.iter().enumerate() {
            let t = i as f64 * dt;
            assert!((v - 4.0 * t.powi(3)).abs() < 1e-11, "{i}: {v}");
        }
    }

    #[test]
    fn power_law_recovers_exponent() {
        let x = [0.01, 0.02, 0.05, 0.1];
        let y: Vec<f64> = x.iter().map(|v: &f64| 3.0 * v.powf(2.0)).collect();
        let (a, p) = power_law_fit(&x, &y);
        assert!((a - 3.0).abs() < 1e-10);
        assert!((p - 2.0).abs() < 1e-12);
    }
}
