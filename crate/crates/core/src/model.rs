//! Physical parameters, the mixing angle of the cavity dark state and the
//! dark/bright basis rotation.
//!
//! All rates share one time unit. The amplitude phase convention follows the
//! collective dark state `|D,1> = -i cos(theta) |b,1> + i sin(theta) |c,0>`;
//! quantities compared across models are moduli or relative phases.

use num_complex::Complex64;

use crate::error::{Error, Result};

/// Rates and counts of the atom-cavity system.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SystemParams {
    /// Single-atom vacuum Rabi frequency `g`.
    pub g: f64,
    /// Number of atoms `N`.
    pub n_atoms: u64,
    /// Empty-cavity decay rate.
    pub gamma: f64,
    /// Excited-state decay rate.
    pub gamma_a: f64,
    /// Decay rate of the lower-level (spin) coherence.
    pub gamma_c: f64,
    /// Characteristic input pulse duration `T`.
    pub t_pulse: f64,
}

impl SystemParams {
    pub fn new(
        g: f64,
        n_atoms: u64,
        gamma: f64,
        gamma_a: f64,
        gamma_c: f64,
        t_pulse: f64,
    ) -> Result<Self> {
        let p = Self { g, n_atoms, gamma, gamma_a, gamma_c, t_pulse };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from the dimensionless products used by the CLI:
    /// `gamma*T`, `g*sqrt(N)*T`, `gamma_a*T`, `gamma_c*T`.
    pub fn from_dimensionless(
        gamma_t: f64,
        g_sqrt_n_t: f64,
        gamma_a_t: f64,
        gamma_c_t: f64,
        n_atoms: u64,
        t_pulse: f64,
    ) -> Result<Self> {
        if n_atoms == 0 {
            return Err(Error::InvalidParams("n_atoms must be >= 1".into()));
        }
        if !(t_pulse > 0.0) {
            return Err(Error::InvalidParams(format!("t_pulse must be > 0, got {t_pulse}")));
        }
        let g = g_sqrt_n_t / t_pulse / (n_atoms as f64).sqrt();
        Self::new(g, n_atoms, gamma_t / t_pulse, gamma_a_t / t_pulse, gamma_c_t / t_pulse, t_pulse)
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::InvalidParams(msg));
        if !(self.g > 0.0) || !self.g.is_finite() {
            return bad(format!("g must be finite and > 0, got {}", self.g));
        }
        if self.n_atoms == 0 {
            return bad("n_atoms must be >= 1".into());
        }
        for (name, v) in [("gamma", self.gamma), ("gamma_a", self.gamma_a), ("gamma_c", self.gamma_c)]
        {
            if !(v >= 0.0) || !v.is_finite() {
                return bad(format!("{name} must be finite and >= 0, got {v}"));
            }
        }
        if !(self.t_pulse > 0.0) || !self.t_pulse.is_finite() {
            return bad(format!("t_pulse must be finite and > 0, got {}", self.t_pulse));
        }
        let gc = self.collective_coupling();
        if !(gc > 0.0) || !gc.is_finite() {
            return bad(format!("collective coupling g*sqrt(N) must be finite and > 0, got {gc}"));
        }
        Ok(())
    }

    /// Collective coupling `g*sqrt(N)`.
    pub fn collective_coupling(&self) -> f64 {
        self.g * (self.n_atoms as f64).sqrt()
    }

    /// `g^2 N`, the only combination of `g` and `N` entering the dynamics.
    pub fn collective_coupling_sqr(&self) -> f64 {
        self.g * self.g * self.n_atoms as f64
    }

    /// `gamma * T`.
    pub fn gamma_t(&self) -> f64 {
        self.gamma * self.t_pulse
    }

    pub fn with_gamma_c(mut self, gamma_c: f64) -> Self {
        self.gamma_c = gamma_c;
        self
    }
}

/// Mixing angle `tan(theta) = g sqrt(N) / Omega`, stored through its
/// cosine and sine together with the drive it was computed from.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MixingAngle {
    pub cos_theta: f64,
    pub sin_theta: f64,
    /// Classical Rabi frequency `Omega` (may be `+inf`).
    pub omega: f64,
    /// `Omega_0 = sqrt(g^2 N + Omega^2)`.
    pub omega0: f64,
}

impl MixingAngle {
    /// Angle with a prescribed `cos(theta)`; `omega` follows from the
    /// collective coupling and is infinite for `cos(theta) = 1`.
    pub fn from_cos_theta(params: &SystemParams, cos_theta: f64) -> Result<Self> {
        if !(0.0..=1.0).contains(&cos_theta) {
            return Err(Error::Domain(format!("cos(theta) must lie in [0, 1], got {cos_theta}")));
        }
        let gc = params.collective_coupling();
        let sin_theta = ((1.0 - cos_theta) * (1.0 + cos_theta)).sqrt();
        let omega = if sin_theta == 0.0 { f64::INFINITY } else { gc * cos_theta / sin_theta };
        let omega0 = if sin_theta == 0.0 { f64::INFINITY } else { gc / sin_theta };
        Ok(Self { cos_theta, sin_theta, omega, omega0 })
    }

    pub fn tan_theta(&self) -> f64 {
        self.sin_theta / self.cos_theta
    }
}

/// Amplitudes of the single-excitation manifold: excited collective state,
/// cavity photon, collective spin state and the free-field modes.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct AmplitudeState {
    pub a: Complex64,
    pub b: Complex64,
    pub c: Complex64,
    pub xi: Vec<Complex64>,
}

impl AmplitudeState {
    pub fn vacuum(n_modes: usize) -> Self {
        Self { xi: vec![Complex64::new(0.0, 0.0); n_modes], ..Default::default() }
    }

    /// `|a|^2 + |b|^2 + |c|^2 + sum |xi_k|^2`.
    pub fn norm_sqr(&self) -> f64 {
        self.a.norm_sqr()
            + self.b.norm_sqr()
            + self.c.norm_sqr()
            + self.xi.iter().map(|x| x.norm_sqr()).sum::<f64>()
    }
}

/// `cos(theta) = Omega / sqrt(Omega^2 + g^2 N)` for a drive `omega >= 0`.
pub fn mixing_angle_from_omega(params: &SystemParams, omega: f64) -> Result<MixingAngle> {
    if !(omega >= 0.0) {
        return Err(Error::Domain(format!("drive Omega must be >= 0, got {omega}")));
    }
    let gc = params.collective_coupling();
    if omega.is_infinite() {
        return Ok(MixingAngle { cos_theta: 1.0, sin_theta: 0.0, omega, omega0: omega });
    }
    let omega0 = omega.hypot(gc);
    Ok(MixingAngle { cos_theta: omega / omega0, sin_theta: gc / omega0, omega, omega0 })
}

/// Inverse of [`mixing_angle_from_omega`]: `Omega = g sqrt(N) cos / sqrt(1 - cos^2)`.
pub fn omega_from_cos_theta(params: &SystemParams, cos_theta: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&cos_theta) {
        return Err(Error::Domain(format!("cos(theta) must lie in [0, 1), got {cos_theta}")));
    }
    if cos_theta == 1.0 {
        return Err(Error::Infeasible("cos(theta) = 1 requires an infinite drive".into()));
    }
    let sin_theta = ((1.0 - cos_theta) * (1.0 + cos_theta)).sqrt();
    Ok(params.collective_coupling() * cos_theta / sin_theta)
}

/// Drive recovered from both components of an angle. Unlike
/// [`omega_from_cos_theta`] this stays accurate when `cos(theta)` rounds to
/// within a few ulps of one.
pub fn omega_from_angle(params: &SystemParams, angle: &MixingAngle) -> f64 {
    if angle.sin_theta == 0.0 {
        f64::INFINITY
    } else {
        params.collective_coupling() * angle.cos_theta / angle.sin_theta
    }
}

/// Rotates `(b, c)` into the dark/bright pair
/// `D = i(-cos b + sin c)`, `B = sin b + cos c`.
pub fn dark_bright_rotate(state: &AmplitudeState, angle: &MixingAngle) -> (Complex64, Complex64) {
    rotate_pair(state.b, state.c, angle.cos_theta, angle.sin_theta)
}

pub(crate) fn rotate_pair(
    b: Complex64,
    c: Complex64,
    cos_theta: f64,
    sin_theta: f64,
) -> (Complex64, Complex64) {
    let i = Complex64::i();
    let dark = i * (-b * cos_theta + c * sin_theta);
    let bright = b * sin_theta + c * cos_theta;
    (dark, bright)
}

/// Amplitude decay rate of the dark state, `gamma_D / 2 = (gamma / 2) cos^2(theta)`.
pub fn dark_state_decay_rate(params: &SystemParams, angle: &MixingAngle) -> f64 {
    0.5 * params.gamma * angle.cos_theta * angle.cos_theta
}
