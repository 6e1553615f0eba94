//! `eit-memory`: runs loading, storage cycles, control synthesis and the
//! reference checks from a scenario file.
//!
//! Exit codes: 0 success, 2 configuration error, 3 infeasible scenario,
//! 4 numeric convergence failure, 1 anything else.

mod commands;
mod config;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use commands::{Context, Summary};
use config::ScenarioConfig;

#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("configuration error: {0}")]
    Config(String),
    #[error("infeasible: {0}")]
    Infeasible(String),
    #[error(transparent)]
    Core(#[from] eit_memory::Error),
    #[error("i/o error: {0}")]
    Io(#[from] std::io::Error),
}

impl CliError {
    fn exit_code(&self) -> u8 {
        use eit_memory::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Infeasible(_) => 3,
            CliError::Io(_) => 1,
            CliError::Core(e) => match e {
                E::Infeasible(_) | E::SingularEnvelope { .. } => 3,
                E::NumericConvergence(_) => 4,
                E::Io(_) => 1,
                _ => 2,
            },
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "eit-memory", version, about = "Single-photon storage in intracavity EIT dark states")]
struct Cli {
    /// Scenario file with `key = value` lines.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Start from a named preset (fig3, fig4, fig4-gaussian, fig4-hyper-gaussian, fig5).
    #[arg(long, global = true)]
    preset: Option<String>,
    /// Override one key, e.g. `--set gamma_t=8`. Repeatable.
    #[arg(long = "set", global = true, value_name = "KEY=VALUE")]
    overrides: Vec<String>,
    /// Output directory; the EIT_MEMORY_OUT environment variable takes precedence.
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Load a pulse into the dark state.
    Load,
    /// Load, hold and release.
    Cycle,
    /// Synthesize the impedance-matching control schedule.
    Synthesize,
    /// Output envelopes at fixed effective cavity decay.
    Fig3,
    /// Storage loss against pulse arrival time.
    SweepTiming,
    /// Store and release polarization qubits.
    Polarization,
    /// Classical Fabry-Perot round-trip cross-check.
    OracleClassical,
    /// Adiabatic-following margins of a schedule.
    CheckAdiabaticity,
}

impl Command {
    fn name(&self) -> &'static str {
        match self {
            Command::Load => "load",
            Command::Cycle => "cycle",
            Command::Synthesize => "synthesize",
            Command::Fig3 => "fig3",
            Command::SweepTiming => "sweep-timing",
            Command::Polarization => "polarization",
            Command::OracleClassical => "oracle-classical",
            Command::CheckAdiabaticity => "check-adiabaticity",
        }
    }
}

fn build_config(cli: &Cli) -> Result<ScenarioConfig, CliError> {
    let mut cfg = match &cli.preset {
        Some(name) => ScenarioConfig::preset(name)?,
        None => ScenarioConfig::default(),
    };
    if let Some(path) = &cli.config {
        cfg.apply_file(path)?;
    }
    for o in &cli.overrides {
        cfg.apply_override(o)?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli, summary: &mut Summary) -> Result<Context, (Option<Context>, CliError)> {
    let config = build_config(cli).map_err(|e| (None, e))?;
    let out_dir = commands::resolve_out_dir(&config, cli.out.as_deref());
    let ctx = Context { config, out_dir };
    let result = match cli.command {
        Command::Load => commands::load(&ctx, summary),
        Command::Cycle => commands::cycle(&ctx, summary),
        Command::Synthesize => commands::synthesize(&ctx, summary),
        Command::Fig3 => commands::fig3(&ctx, summary),
        Command::SweepTiming => commands::sweep_timing(&ctx, summary),
        Command::Polarization => commands::polarization(&ctx, summary),
        Command::OracleClassical => commands::oracle_classical(&ctx, summary),
        Command::CheckAdiabaticity => commands::check_adiabaticity_cmd(&ctx, summary),
    };
    match result {
        Ok(()) => Ok(ctx),
        Err(e) => Err((Some(ctx), e)),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let mut summary = Summary::default();
    let name = cli.command.name();
    let (ctx, error) = match run(&cli, &mut summary) {
        Ok(ctx) => (Some(ctx), None),
        Err((ctx, e)) => (ctx, Some(e)),
    };
    summary.entries.insert(0, ("command".into(), name.into()));
    summary.entries.push(("status".into(), if error.is_none() { "ok".into() } else { "error".into() }));
    print!("{}", summary.render());
    if let Some(ctx) = &ctx {
        if let Err(e) = ctx.write_summary(name, &summary) {
            eprintln!("eit-memory: {e}");
            return ExitCode::from(e.exit_code());
        }
    }
    match error {
        None => ExitCode::SUCCESS,
        Some(e) => {
            eprintln!("eit-memory: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
