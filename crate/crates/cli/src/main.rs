use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use tfch_cli::{run, Mode, RunConfig, Settings, Status};

/// Thin-film Stokes Cahn-Hilliard solvers.
#[derive(Parser)]
#[command(name = "tfch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evolve the periodic film and record a trajectory.
    Evolve(Common),
    /// Solve for the equilibrium dip across a single interface.
    Bvp(Common),
    /// Equilibrium dip over a range of r or |A|.
    Sweep(Common),
    /// Minimum-height bound as a function of |A|.
    Bound(Common),
    /// Evolve the regularized Galerkin system.
    Galerkin(Common),
    /// Test the functional inequalities on random trigonometric fields.
    CheckInequalities(Common),
}

#[derive(Args)]
struct Common {
    /// Configuration file (`key = value` lines); defaults apply without one.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// Override the seed.
    #[arg(long, value_name = "N")]
    seed: Option<u64>,
    /// Directory for the output files.
    #[arg(long, value_name = "DIR")]
    output: PathBuf,
    /// Also write SVG plots.
    #[arg(long)]
    emit_plots: bool,
    /// Override a single key, e.g. `--set params.r=10` (repeatable).
    #[arg(long = "set", value_name = "KEY=VALUE")]
    overrides: Vec<String>,
}

const CONFIG_ERROR: u8 = 2;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, common) = match cli.command {
        Command::Evolve(c) => (Mode::Evolve, c),
        Command::Bvp(c) => (Mode::Bvp, c),
        Command::Sweep(c) => (Mode::Sweep, c),
        Command::Bound(c) => (Mode::Bound, c),
        Command::Galerkin(c) => (Mode::Galerkin, c),
        Command::CheckInequalities(c) => (Mode::CheckInequalities, c),
    };
    let cfg = match configure(mode, &common) {
        Ok(cfg) => cfg,
        Err(msg) => {
            eprintln!("error: {msg}");
            return ExitCode::from(CONFIG_ERROR);
        }
    };
    match run(&cfg, &common.output) {
        Ok(outcome) => {
            match &outcome.status {
                Status::Success => eprintln!("{}: done, outputs in {}", mode.name(), common.output.display()),
                Status::SolverFailure(m) => eprintln!("solver failure (partial outputs kept): {m}"),
                Status::InvariantViolation(v) => {
                    for m in v {
                        eprintln!("invariant violated: {m}");
                    }
                }
            }
            ExitCode::from(outcome.status.exit_code() as u8)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(CONFIG_ERROR)
        }
    }
}

fn configure(mode: Mode, common: &Common) -> Result<RunConfig, String> {
    let mut settings = match &common.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| format!("{}: {e}", path.display()))?;
            Settings::parse(&text).map_err(|e| format!("{}: {e}", path.display()))?
        }
        None => Settings::default(),
    };
    for kv in &common.overrides {
        let (k, v) = kv.split_once('=').ok_or_else(|| format!("--set expects KEY=VALUE, got '{kv}'"))?;
        settings.set_checked(k.trim(), v.trim()).map_err(|e| e.to_string())?;
    }
    if let Some(seed) = common.seed {
        settings.set("seed", seed.to_string());
    }
    if common.emit_plots {
        settings.set("output.plots", "true");
    }
    RunConfig::resolve(mode, &settings).map_err(|e| e.to_string())
}
