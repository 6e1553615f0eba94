//! Scenario configuration: flat `key = value` files, presets and overrides.
//! Every time and rate is in units of the pulse duration `T`.

use std::path::{Path, PathBuf};

use eit_memory::{PulseFamily, SystemParams, TimeGrid};

use crate::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ScheduleSource {
    Analytic,
    Solved,
    File,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ModelSelector {
    Reduced,
    Full,
    Both,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ScenarioConfig {
    pub gamma_t: f64,
    pub g_sqrt_n_t: f64,
    pub gamma_a_t: f64,
    pub gamma_c_t: f64,
    pub n_atoms: u64,
    pub pulse: PulseFamily,
    pub pulse_file: Option<PathBuf>,
    pub delay: f64,
    pub t_start: f64,
    pub t_end: f64,
    pub points: usize,
    pub schedule: ScheduleSource,
    pub schedule_file: Option<PathBuf>,
    pub cos_theta_start: Option<f64>,
    pub load_end: f64,
    pub load_points: usize,
    pub hold: f64,
    pub hold_sweep: Vec<f64>,
    pub model: ModelSelector,
    pub modes: usize,
    pub delta_max: f64,
    pub omega_cap: f64,
    pub substeps: Option<usize>,
    pub halving_tolerance: f64,
    pub margin: f64,
    pub gamma_eff: Vec<f64>,
    pub deltas: Vec<f64>,
    pub qubits: usize,
    pub seed: u64,
    pub alpha: Option<(f64, f64)>,
    pub beta: Option<(f64, f64)>,
    pub reflectivity: f64,
    pub zeta: f64,
    pub tau_c: f64,
    pub tau_0: f64,
    pub output_stride: usize,
    pub output: PathBuf,
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        Self {
            gamma_t: 4.0,
            g_sqrt_n_t: 30.0,
            gamma_a_t: 1.0,
            gamma_c_t: 0.0,
            n_atoms: 1,
            pulse: PulseFamily::Sech,
            pulse_file: None,
            delay: 0.0,
            t_start: -10.0,
            t_end: 40.0,
            points: 8192,
            schedule: ScheduleSource::Analytic,
            schedule_file: None,
            cos_theta_start: None,
            load_end: 10.0,
            load_points: 4097,
            hold: 10.0,
            hold_sweep: Vec::new(),
            model: ModelSelector::Reduced,
            modes: 1024,
            delta_max: 160.0,
            omega_cap: 10.0,
            substeps: None,
            halving_tolerance: 1e-6,
            margin: 100.0,
            gamma_eff: vec![1.0, 10.0, 100.0, 1000.0],
            deltas: vec![0.01, 0.02, 0.03, 0.05, 0.07, 0.1],
            qubits: 10,
            seed: 2024,
            alpha: None,
            beta: None,
            reflectivity: 0.99,
            zeta: 1.0,
            tau_c: 0.01,
            tau_0: 0.01,
            output_stride: 1,
            output: PathBuf::from("out"),
        }
    }
}

pub const PRESETS: &[&str] = &["fig3", "fig4", "fig4-gaussian", "fig4-hyper-gaussian", "fig5"];

fn config_err(msg: impl Into<String>) -> CliError {
    CliError::Config(msg.into())
}

fn number<T: std::str::FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value.parse().map_err(|_| config_err(format!("{key}: cannot parse {value:?}")))
}

fn list(key: &str, value: &str) -> Result<Vec<f64>, CliError> {
    value.split(',').map(|v| number(key, v.trim())).collect()
}

fn pair(key: &str, value: &str) -> Result<(f64, f64), CliError> {
    match list(key, value)?.as_slice() {
        [re, im] => Ok((*re, *im)),
        _ => Err(config_err(format!("{key}: expected `re, im`, got {value:?}"))),
    }
}

impl ScenarioConfig {
    pub fn preset(name: &str) -> Result<Self, CliError> {
        let mut c = Self { output_stride: 8, ..Self::default() };
        match name {
            "fig4" => {}
            "fig4-gaussian" => c.pulse = PulseFamily::Gaussian,
            "fig4-hyper-gaussian" => c.pulse = PulseFamily::HyperGaussian,
            "fig5" => c.output_stride = 4,
            "fig3" => {
                c.gamma_t = 1000.0;
                c.g_sqrt_n_t = 3000.0;
            }
            _ => return Err(config_err(format!("unknown preset {name:?}; known: {}", PRESETS.join(", ")))),
        }
        Ok(c)
    }

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let v = value.trim();
        match key.trim() {
            "gamma_t" => self.gamma_t = number(key, v)?,
            "g_sqrt_n_t" => self.g_sqrt_n_t = number(key, v)?,
            "gamma_a_t" => self.gamma_a_t = number(key, v)?,
            "gamma_c_t" => self.gamma_c_t = number(key, v)?,
            "n_atoms" => self.n_atoms = number(key, v)?,
            "pulse" => {
                if v == "file" {
                    self.pulse = PulseFamily::Custom;
                } else {
                    self.pulse = v.parse().map_err(|e: eit_memory::Error| config_err(format!("pulse: {e}")))?;
                }
            }
            "pulse_file" => {
                self.pulse_file = Some(PathBuf::from(v));
                self.pulse = PulseFamily::Custom;
            }
            "delay" => self.delay = number(key, v)?,
            "t_start" => self.t_start = number(key, v)?,
            "t_end" => self.t_end = number(key, v)?,
            "points" => self.points = number(key, v)?,
            "schedule" => {
                self.schedule = match v {
                    "analytic" => ScheduleSource::Analytic,
                    "solved" => ScheduleSource::Solved,
                    "file" => ScheduleSource::File,
                    _ => return Err(config_err(format!("schedule: expected analytic, solved or file, got {v:?}"))),
                }
            }
            "schedule_file" => {
                self.schedule_file = Some(PathBuf::from(v));
                self.schedule = ScheduleSource::File;
            }
            "cos_theta_start" => self.cos_theta_start = Some(number(key, v)?),
            "load_end" => self.load_end = number(key, v)?,
            "load_points" => self.load_points = number(key, v)?,
            "hold" => self.hold = number(key, v)?,
            "hold_sweep" => self.hold_sweep = list(key, v)?,
            "model" => {
                self.model = match v {
                    "reduced" => ModelSelector::Reduced,
                    "full" => ModelSelector::Full,
                    "both" => ModelSelector::Both,
                    _ => return Err(config_err(format!("model: expected reduced, full or both, got {v:?}"))),
                }
            }
            "modes" => self.modes = number(key, v)?,
            "delta_max" => self.delta_max = number(key, v)?,
            "omega_cap" => self.omega_cap = number(key, v)?,
            "substeps" => self.substeps = if v == "auto" { None } else { Some(number(key, v)?) },
            "halving_tolerance" => self.halving_tolerance = number(key, v)?,
            "margin" => self.margin = number(key, v)?,
            "gamma_eff" => self.gamma_eff = list(key, v)?,
            "deltas" => self.deltas = list(key, v)?,
            "qubits" => self.qubits = number(key, v)?,
            "seed" => self.seed = number(key, v)?,
            "alpha" => self.alpha = Some(pair(key, v)?),
            "beta" => self.beta = Some(pair(key, v)?),
            "reflectivity" => self.reflectivity = number(key, v)?,
            "zeta" => self.zeta = number(key, v)?,
            "tau_c" => self.tau_c = number(key, v)?,
            "tau_0" => self.tau_0 = number(key, v)?,
            "output_stride" => self.output_stride = number(key, v)?,
            "output" => self.output = PathBuf::from(v),
            other => return Err(config_err(format!("unknown key {other:?}"))),
        }
        Ok(())
    }

    /// Applies `key = value` lines; `#` starts a comment. A file without a
    /// single setting is rejected.
    pub fn apply_text(&mut self, text: &str) -> Result<(), CliError> {
        let mut settings = 0;
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| config_err(format!("line {}: expected `key = value`, got {raw:?}", n + 1)))?;
            self.set(key, value).map_err(|e| config_err(format!("line {}: {e}", n + 1)))?;
            settings += 1;
        }
        if settings == 0 {
            return Err(config_err("configuration file contains no settings"));
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<(), CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| config_err(format!("cannot read {}: {e}", path.display())))?;
        self.apply_text(&text)
    }

    /// `key=value` from the command line.
    pub fn apply_override(&mut self, spec: &str) -> Result<(), CliError> {
        let (key, value) =
            spec.split_once('=').ok_or_else(|| config_err(format!("--set expects key=value, got {spec:?}")))?;
        self.set(key, value)
    }

    pub fn params(&self) -> Result<SystemParams, CliError> {
        SystemParams::from_dimensionless(self.gamma_t, self.g_sqrt_n_t, self.gamma_a_t, self.gamma_c_t, self.n_atoms, 1.0)
            .map_err(|e| config_err(e.to_string()))
    }

    pub fn grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(self.t_start, self.t_end, self.points).map_err(|e| config_err(e.to_string()))
    }

    pub fn load_grid(&self) -> Result<TimeGrid, CliError> {
        TimeGrid::new(self.t_start, self.load_end, self.load_points).map_err(|e| config_err(e.to_string()))
    }

    /// Rejects inconsistent settings before anything runs.
    pub fn validate(&self) -> Result<(), CliError> {
        self.params()?;
        if self.output_stride == 0 {
            return Err(config_err("output_stride must be at least 1"));
        }
        if self.pulse == PulseFamily::Custom && self.pulse_file.is_none() {
            return Err(config_err("pulse = file needs pulse_file"));
        }
        if self.schedule == ScheduleSource::File && self.schedule_file.is_none() {
            return Err(config_err("schedule = file needs schedule_file"));
        }
        if !(self.omega_cap > 0.0) {
            return Err(config_err("omega_cap must be positive"));
        }
        Ok(())
    }
}
