//! One function per subcommand. Each writes CSV files into the output
//! directory and returns a summary.

use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use eit_memory::classical::{roundtrip_simulate, schedule_matching_residual, write_residual_csv, write_roundtrip_csv, MirrorCavity};
use eit_memory::control::{default_cos_theta_start, read_schedule_csv, write_schedule_csv};
use eit_memory::cycle::{
    fit_sech, fit_storage_decay, hold_sweep, run_cycle, run_polarization_cycle, run_polarization_cycle_full, CyclePlan,
    PolarizationResult, PolarizationState,
};
use eit_memory::export::{sci, write_columns_csv};
use eit_memory::full::{encode_input_modes, integrate_full, write_full_csv, FullOptions, ModeBank};
use eit_memory::grid::cumulative_integral;
use eit_memory::pulses::load_envelope_csv;
use eit_memory::reduced::{effective_decay_response, fit_timing_loss, integrate_dark_state, timing_sensitivity, write_reduced_csv};
use eit_memory::{
    check_adiabaticity, make_pulse, sech_matched_cos_theta, solve_impedance_matching, ControlSchedule, PulseEnvelope,
    PulseFamily, SystemParams, TimeGrid,
};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{ModelSelector, ScenarioConfig, ScheduleSource};
use crate::CliError;

/// Ordered `key = value` report.
#[derive(Debug, Default)]
pub struct Summary {
    pub entries: Vec<(String, String)>,
}

impl Summary {
    fn num(&mut self, key: &str, value: f64) {
        self.entries.push((key.to_string(), sci(value)));
    }

    fn text(&mut self, key: &str, value: impl ToString) {
        self.entries.push((key.to_string(), value.to_string()));
    }

    pub fn render(&self) -> String {
        self.entries.iter().map(|(k, v)| format!("{k} = {v}\n")).collect()
    }
}

pub struct Context {
    pub config: ScenarioConfig,
    pub out_dir: PathBuf,
}

impl Context {
    fn create(&self, name: &str) -> Result<BufWriter<File>, CliError> {
        std::fs::create_dir_all(&self.out_dir)?;
        Ok(BufWriter::new(File::create(self.out_dir.join(name))?))
    }

    /// Writes a CSV produced by `emit`, keeping the header and every
    /// `output_stride`-th row plus the last one.
    fn csv<F>(&self, name: &str, emit: F) -> Result<(), CliError>
    where
        F: FnOnce(&mut Vec<u8>) -> eit_memory::Result<()>,
    {
        let mut buf = Vec::new();
        emit(&mut buf)?;
        let text = String::from_utf8(buf).expect("CSV writers emit UTF-8");
        let stride = self.config.output_stride;
        let mut out = self.create(name)?;
        let lines: Vec<&str> = text.lines().collect();
        for (i, line) in lines.iter().enumerate() {
            if i == 0 || (i - 1) % stride == 0 || i == lines.len() - 1 {
                writeln!(out, "{line}")?;
            }
        }
        out.flush()?;
        Ok(())
    }

    pub fn write_summary(&self, command: &str, summary: &Summary) -> Result<(), CliError> {
        let mut out = self.create(&format!("{command}_summary.txt"))?;
        out.write_all(summary.render().as_bytes())?;
        out.flush()?;
        Ok(())
    }
}

fn pulse_on(cfg: &ScenarioConfig, grid: TimeGrid) -> Result<PulseEnvelope, CliError> {
    match &cfg.pulse_file {
        Some(path) if cfg.pulse == PulseFamily::Custom => Ok(load_envelope_csv(path, 1.0)?),
        _ => Ok(make_pulse(cfg.pulse, grid, 1.0, cfg.delay)?),
    }
}

fn schedule_for(cfg: &ScenarioConfig, params: &SystemParams, pulse: &PulseEnvelope) -> Result<ControlSchedule, CliError> {
    let grid = *pulse.grid();
    let schedule = match cfg.schedule {
        ScheduleSource::Analytic => sech_matched_cos_theta(params, grid)?,
        ScheduleSource::Solved => {
            let start = cfg.cos_theta_start.unwrap_or_else(|| default_cos_theta_start(params));
            solve_impedance_matching(params, pulse, start)?
        }
        ScheduleSource::File => {
            let path = cfg.schedule_file.as_ref().expect("validated");
            let file = File::open(path).map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            let s = read_schedule_csv(file, params)?;
            s.grid.ensure_matches(&grid, "schedule file and pulse")?;
            s
        }
    };
    Ok(schedule)
}

fn require_feasible(schedule: &ControlSchedule) -> Result<(), CliError> {
    if schedule.feasible {
        Ok(())
    } else {
        Err(CliError::Infeasible(schedule.diagnostics.join("; ")))
    }
}

fn full_setup(cfg: &ScenarioConfig, params: &SystemParams) -> Result<(ModeBank, FullOptions), CliError> {
    let bank = ModeBank::new(params.gamma, cfg.delta_max, cfg.modes)?;
    let opts = FullOptions { substeps: cfg.substeps, halving_tolerance: cfg.halving_tolerance, ..FullOptions::default() };
    Ok((bank, opts))
}

pub fn load(ctx: &Context, summary: &mut Summary) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let params = cfg.params()?;
    let pulse = pulse_on(cfg, cfg.grid()?)?;
    let schedule = schedule_for(cfg, &params, &pulse)?;
    ctx.csv("schedule.csv", |w| write_schedule_csv(w, &schedule))?;
    summary.text("schedule_feasible", schedule.feasible);
    require_feasible(&schedule)?;

    let mut reduced_pop = None;
    if cfg.model != ModelSelector::Full {
        let traj = integrate_dark_state(&params, &pulse, &schedule)?;
        ctx.csv("load_reduced.csv", |w| write_reduced_csv(w, &traj))?;
        let ledger = traj.probability_ledger().iter().map(|v| (v - 1.0).abs()).fold(0.0, f64::max);
        summary.num("final_population", traj.final_amplitude().norm_sqr());
        summary.num("final_abs_d", traj.final_amplitude().norm());
        summary.num("reflected_energy", traj.reflected_energy());
        summary.num("ledger_max_error", ledger);
        for w in &traj.warnings {
            summary.text("warning", w);
        }
        reduced_pop = Some(traj.population);
    }
    if cfg.model != ModelSelector::Reduced {
        let (bank, opts) = full_setup(cfg, &params)?;
        let driven = schedule.saturate_drive(&params, cfg.omega_cap * params.collective_coupling())?;
        let modes = encode_input_modes(&pulse, &bank)?;
        let traj = integrate_full(&params, &bank, &modes, &driven, &opts)?;
        ctx.csv("load_full.csv", |w| write_full_csv(w, &traj))?;
        summary.num("full_final_population", *traj.population.last().unwrap());
        summary.num("full_max_norm_drift", traj.max_norm_drift());
        if let Some(e) = traj.step_halving_error {
            summary.num("full_step_halving_error", e);
        }
        if let Some(pop) = reduced_pop {
            let dev = pop.iter().zip(&traj.population).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
            summary.num("max_population_deviation", dev);
        }
    }
    Ok(())
}

fn plan_for(cfg: &ScenarioConfig, params: SystemParams) -> Result<(CyclePlan, PulseEnvelope), CliError> {
    let pulse = pulse_on(cfg, cfg.load_grid()?)?;
    let load = schedule_for(cfg, &params, &pulse)?;
    require_feasible(&load)?;
    Ok((CyclePlan::time_reversed(params, load, cfg.hold)?, pulse))
}

pub fn cycle(ctx: &Context, summary: &mut Summary) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let params = cfg.params()?;
    let (plan, pulse) = plan_for(cfg, params)?;
    let r = run_cycle(&plan, &pulse)?;

    let rel = &plan.release_schedule;
    let sq: Vec<f64> = rel.cos_theta.iter().map(|c| c * c).collect();
    let decay = cumulative_integral(&sq, rel.grid.dt());
    let d1 = r.release_amplitude.norm_sqr();
    let mut cols: [Vec<f64>; 7] = Default::default();
    let load_rows = (0..r.load.grid.len()).map(|i| {
        [
            r.load.grid.time(i),
            r.load.phi_in[i].re,
            r.load.phi_in[i].im,
            r.load.phi_out[i].re,
            r.load.phi_out[i].im,
            r.load.population[i],
            r.load.cos_theta[i],
        ]
    });
    let release_rows = (0..rel.grid.len()).map(|i| {
        let v = r.output.waveform.values[i];
        [rel.grid.time(i), 0.0, 0.0, v.re, v.im, d1 * (-params.gamma * decay[i]).exp(), rel.cos_theta[i]]
    });
    for row in load_rows.chain(release_rows) {
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    let names = ["t", "phi_in_re", "phi_in_im", "phi_out_re", "phi_out_im", "dark_population", "cos_theta"];
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    ctx.csv("cycle.csv", |w| write_columns_csv(w, &names, &refs))?;

    let l = r.ledger;
    summary.num("reflected", l.reflected);
    summary.num("stored", l.stored);
    summary.num("decayed", l.decayed);
    summary.num("released", l.released);
    summary.num("residual", l.residual);
    summary.num("missed", l.missed);
    summary.num("ledger_total", l.total());
    summary.num("release_start", plan.release_time());
    summary.num("release_peak_time", r.output.waveform.peak_time());
    let fit = fit_sech(&r.output.waveform)?;
    summary.num("sech_fit_center", fit.center);
    summary.num("sech_fit_width", fit.width);
    summary.num("sech_fit_residual", fit.residual);

    if !cfg.hold_sweep.is_empty() {
        let released = hold_sweep(params, &plan.load_schedule, &pulse, &cfg.hold_sweep)?;
        ctx.csv("hold_sweep.csv", |w| write_columns_csv(w, &["hold", "released"], &[&cfg.hold_sweep, &released]))?;
        if cfg.hold_sweep.len() >= 2 {
            summary.num("fitted_decay_rate", fit_storage_decay(&cfg.hold_sweep, &released)?);
            summary.num("gamma_c", params.gamma_c);
        }
    }
    if cfg.model != ModelSelector::Reduced {
        summary.text("note", "cycle runs the reduced model; use polarization for full-model loading");
    }
    Ok(())
}

pub fn synthesize(ctx: &Context, summary: &mut Summary) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let params = cfg.params()?;
    let pulse = pulse_on(cfg, cfg.grid()?)?;
    let schedule = schedule_for(cfg, &params, &pulse)?;
    ctx.csv("schedule.csv", |w| write_schedule_csv(w, &schedule))?;
    summary.text("schedule_feasible", schedule.feasible);
    for d in &schedule.diagnostics {
        summary.text("diagnostic", d);
    }
    summary.num("clamped_points", schedule.clamp_events() as f64);
    if pulse.family == PulseFamily::Sech && cfg.schedule == ScheduleSource::Solved && schedule.feasible {
        let exact = sech_matched_cos_theta(&params, *pulse.grid())?;
        let dev = schedule.cos_theta.iter().zip(&exact.cos_theta).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max);
        summary.num("max_deviation_from_closed_form", dev);
    }
    if schedule.feasible {
        let report = check_adiabaticity(&params, &schedule, cfg.margin)?;
        summary.num("adiabaticity_margin", report.margin);
        for r in &report.ratios {
            summary.num(&format!("adiabaticity_{}", r.name), r.value);
        }
        summary.text("adiabaticity_pass", report.pass);
    }
    require_feasible(&schedule)
}

pub fn fig3(ctx: &Context, summary: &mut Summary) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let params = cfg.params()?;
    if cfg.pulse == PulseFamily::Custom {
        return Err(CliError::Config("fig3 needs a closed-form pulse family".into()));
    }
    let mut rates = cfg.gamma_eff.clone();
    rates.sort_by(|a, b| b.total_cmp(a));
    let mut responses = Vec::new();
    for &g in &rates {
        let r = effective_decay_response(&params, cfg.pulse, g, cfg.t_start, cfg.t_end)?;
        let tr = &r.trajectory;
        let stride = ((0.01 / tr.grid.dt()).round() as usize).max(1);
        let idx: Vec<usize> = (0..tr.grid.len()).step_by(stride).collect();
        let col = |f: &dyn Fn(usize) -> f64| idx.iter().map(|&i| f(i)).collect::<Vec<f64>>();
        let t = col(&|i| tr.grid.time(i));
        let pin = col(&|i| tr.phi_in[i].re);
        let pre = col(&|i| tr.phi_out[i].re);
        let pim = col(&|i| tr.phi_out[i].im);
        ctx.csv(&format!("fig3_gamma_eff_{g}.csv"), |w| {
            write_columns_csv(w, &["t", "phi_in_re", "phi_out_re", "phi_out_im"], &[&t, &pin, &pre, &pim])
        })?;
        summary.num(&format!("overlap_gamma_eff_{g}"), r.reflected_overlap);
        summary.num(&format!("tail_gamma_eff_{g}"), r.tail_duration);
        responses.push(r);
    }
    let overlap_up = responses.windows(2).all(|w| w[1].reflected_overlap > w[0].reflected_overlap);
    let tail_up = responses.windows(2).all(|w| w[1].tail_duration > w[0].tail_duration);
    summary.text("overlap_increases_as_gamma_eff_decreases", overlap_up);
    summary.text("tail_increases_as_gamma_eff_decreases", tail_up);
    Ok(())
}

pub fn sweep_timing(ctx: &Context, summary: &mut Summary) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let params = cfg.params()?;
    let pulse = pulse_on(cfg, cfg.grid()?)?;
    let schedule = schedule_for(cfg, &params, &pulse)?;
    require_feasible(&schedule)?;
    let amps = timing_sensitivity(&params, &pulse, &schedule, &cfg.deltas)?;
    let loss: Vec<f64> = amps.iter().map(|a| 1.0 - a).collect();
    ctx.csv("timing.csv", |w| write_columns_csv(w, &["delta", "abs_d", "loss"], &[&cfg.deltas, &amps, &loss]))?;
    let (a, p) = fit_timing_loss(&cfg.deltas, &amps)?;
    summary.num("fit_prefactor", a);
    summary.num("fit_exponent", p);
    Ok(())
}

fn qubits(cfg: &ScenarioConfig) -> Result<Vec<PolarizationState>, CliError> {
    match (cfg.alpha, cfg.beta) {
        (Some(a), Some(b)) => Ok(vec![PolarizationState::new(Complex64::new(a.0, a.1), Complex64::new(b.0, b.1))
            .map_err(|e| CliError::Config(e.to_string()))?]),
        (None, None) => {
            let mut rng = ChaCha8Rng::seed_from_u64(cfg.seed);
            (0..cfg.qubits)
                .map(|_| {
                    let a = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    let b = Complex64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0));
                    Ok(PolarizationState::normalized(a, b)?)
                })
                .collect()
        }
        _ => Err(CliError::Config("set both alpha and beta, or neither".into())),
    }
}

fn write_polarization(
    ctx: &Context,
    name: &str,
    qs: &[PolarizationState],
    results: &[PolarizationResult],
    summary: &mut Summary,
) -> Result<(), CliError> {
    let mut cols: [Vec<f64>; 10] = Default::default();
    for (q, r) in qs.iter().zip(results) {
        let row = [
            q.alpha.re,
            q.alpha.im,
            q.beta.re,
            q.beta.im,
            r.released.alpha.re,
            r.released.alpha.im,
            r.released.beta.re,
            r.released.beta.im,
            r.fidelity,
            r.phase_error,
        ];
        for (c, v) in cols.iter_mut().zip(row) {
            c.push(v);
        }
    }
    let names = [
        "alpha_re", "alpha_im", "beta_re", "beta_im", "out_alpha_re", "out_alpha_im", "out_beta_re", "out_beta_im",
        "fidelity", "phase_error",
    ];
    let refs: Vec<&[f64]> = cols.iter().map(|c| c.as_slice()).collect();
    ctx.csv(&format!("polarization_{name}.csv"), |w| write_columns_csv(w, &names, &refs))?;
    let min_f = results.iter().map(|r| r.fidelity).fold(1.0, f64::min);
    let max_p = results.iter().map(|r| r.phase_error.abs()).fold(0.0, f64::max);
    summary.num(&format!("{name}_min_fidelity"), min_f);
    summary.num(&format!("{name}_max_phase_error"), max_p);
    Ok(())
}

pub fn polarization(ctx: &Context, summary: &mut Summary) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let params = cfg.params()?;
    let (plan, pulse) = plan_for(cfg, params)?;
    let qs = qubits(cfg)?;
    if cfg.model != ModelSelector::Full {
        let results = qs.iter().map(|q| run_polarization_cycle(&plan, &pulse, q)).collect::<Result<Vec<_>, _>>()?;
        write_polarization(ctx, "reduced", &qs, &results, summary)?;
    }
    if cfg.model != ModelSelector::Reduced {
        let (bank, opts) = full_setup(cfg, &params)?;
        let driven = plan.load_schedule.saturate_drive(&params, cfg.omega_cap * params.collective_coupling())?;
        let plan = CyclePlan::new(params, driven, plan.hold_duration, plan.release_schedule.clone())?;
        let results = qs
            .iter()
            .map(|q| run_polarization_cycle_full(&plan, &pulse, q, &bank, &opts))
            .collect::<Result<Vec<_>, _>>()?;
        write_polarization(ctx, "full", &qs, &results, summary)?;
    }
    Ok(())
}

pub fn oracle_classical(ctx: &Context, summary: &mut Summary) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let params = cfg.params()?;
    let pulse = pulse_on(cfg, cfg.grid()?)?;
    let cavity = MirrorCavity::new(cfg.reflectivity, cfg.zeta, cfg.tau_c, cfg.tau_0)
        .map_err(|e| CliError::Config(e.to_string()))?;
    let rt = roundtrip_simulate(&cavity, pulse.waveform())?;
    ctx.csv("roundtrip.csv", |w| write_roundtrip_csv(w, &rt))?;
    summary.num("delay_samples", rt.delay_samples as f64);
    if let Some(note) = &rt.resampled {
        summary.text("resampled", note);
    }
    summary.num("recursion_vs_rate_equation", rt.max_relative_deviation());
    summary.num("energy_imbalance", rt.energy_imbalance());

    let schedule = schedule_for(cfg, &params, &pulse)?;
    let res = schedule_matching_residual(&params, &schedule, pulse.waveform())?;
    ctx.csv("matching_residual.csv", |w| write_residual_csv(w, &res))?;
    summary.num("matching_residual_max", res.max_abs());
    summary.num("matching_residual_points", res.evaluated() as f64);
    Ok(())
}

pub fn check_adiabaticity_cmd(ctx: &Context, summary: &mut Summary) -> Result<(), CliError> {
    let cfg = &ctx.config;
    let params = cfg.params()?;
    let pulse = pulse_on(cfg, cfg.grid()?)?;
    let schedule = schedule_for(cfg, &params, &pulse)?;
    let report = check_adiabaticity(&params, &schedule, cfg.margin)?;
    summary.num("margin", report.margin);
    for r in &report.ratios {
        summary.num(r.name, r.value);
        summary.text(&format!("{}_pass", r.name), r.pass);
    }
    summary.text("pass", report.pass);
    if report.pass {
        Ok(())
    } else {
        Err(CliError::Infeasible(format!("adiabaticity margin {} not reached", cfg.margin)))
    }
}

pub fn resolve_out_dir(cfg: &ScenarioConfig, flag: Option<&Path>) -> PathBuf {
    if let Some(env) = std::env::var_os("EIT_MEMORY_OUT") {
        return PathBuf::from(env);
    }
    flag.map(Path::to_path_buf).unwrap_or_else(|| cfg.output.clone())
}
