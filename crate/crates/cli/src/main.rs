//! `tgsim`: command-line driver for the dissipative Lieb-Liniger simulator.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure.

mod config;
mod output;
mod run;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use config::{Mode, RunConfig};
use output::{Artifacts, Summary};
use run::RunError;

#[derive(Parser)]
#[command(name = "tgsim", version, about = "Dissipative Lieb-Liniger / Tonks-Girardeau simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run with the mode given in the config file.
    Run(Common),
    /// Parameter audit: derived quantities, |G| and the validity table.
    Params(Common),
    /// Lattice ground state and its correlations.
    Ground(Common),
    /// Time evolution (master equation, trajectories or no-jump).
    Evolve(Common),
    /// Loss-driven relaxation of an uncorrelated state.
    Relax(Common),
    /// Time-dependent coupling or detuning ramp.
    Ramp(Common),
    /// Free-fermion reference tables.
    Oracle(Common),
}

#[derive(Args)]
struct Common {
    /// TOML config, or a previous summary.json.
    #[arg(short, long)]
    config: PathBuf,
    /// Output directory (default: output.dir from the config).
    #[arg(short, long)]
    out: Option<PathBuf>,
    /// Override solver.seed.
    #[arg(long)]
    seed: Option<u64>,
    /// Worker threads for trajectory ensembles (default: available parallelism).
    #[arg(long)]
    threads: Option<usize>,
    /// Increase log verbosity (-v info, -vv debug, -vvv trace).
    #[arg(short, long, action = clap::ArgAction::Count)]
    verbose: u8,
}

const EXIT_CONFIG: u8 = 2;
const EXIT_SOLVER: u8 = 3;

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (mode, args) = match cli.command {
        Command::Run(a) => (None, a),
        Command::Params(a) => (Some(Mode::Params), a),
        Command::Ground(a) => (Some(Mode::Ground), a),
        Command::Evolve(a) => (Some(Mode::Evolve), a),
        Command::Relax(a) => (Some(Mode::Relax), a),
        Command::Ramp(a) => (Some(Mode::Ramp), a),
        Command::Oracle(a) => (Some(Mode::Oracle), a),
    };
    let level = match args.verbose {
        0 => log::LevelFilter::Warn,
        1 => log::LevelFilter::Info,
        2 => log::LevelFilter::Debug,
        _ => log::LevelFilter::Trace,
    };
    env_logger::Builder::new().filter_level(level).parse_default_env().init();

    let config = match RunConfig::load(&args.config).and_then(|c| c.resolve(mode, args.seed)) {
        Ok(c) => c,
        Err(e) => {
            eprintln!("config error: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    };
    if let Some(n) = args.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("config error: `--threads`: {e}");
            return ExitCode::from(EXIT_CONFIG);
        }
    }
    let dir = args.out.unwrap_or_else(|| PathBuf::from(&config.output.dir));
    let mut art = match Artifacts::create(&dir) {
        Ok(a) => a,
        Err(e) => {
            eprintln!("cannot create output directory {}: {e}", dir.display());
            return ExitCode::from(EXIT_SOLVER);
        }
    };

    log::info!("mode = {}, output in {}", config.mode(), dir.display());
    let mut summary = Summary::new(config.clone());
    let outcome = run::run(&config, &mut art, &mut summary);
    for w in &summary.warnings {
        log::warn!("{w}");
    }
    let code = match &outcome {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            summary.status = "failed";
            summary.error = Some(e.to_string());
            match e {
                RunError::Config(_) => ExitCode::from(EXIT_CONFIG),
                RunError::Solver(_) => ExitCode::from(EXIT_SOLVER),
            }
        }
    };
    summary.artifacts = art.written.clone();
    if let Err(e) = art.write_summary(&summary) {
        eprintln!("cannot write summary: {e}");
        return ExitCode::from(EXIT_SOLVER);
    }
    code
}
