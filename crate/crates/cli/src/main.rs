//! `sim`: runs, spectra, parameter sweeps and oracle comparisons.

mod commands;
mod error;
mod output;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use crate::error::CliResult;

#[derive(Parser)]
#[command(name = "sim", version, about = "Time-bin MPS simulator for photonic circuits with time delays")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Args)]
struct Common {
    /// Configuration document (TOML).
    #[arg(long)]
    config: PathBuf,
    /// Directory receiving the CSV files and manifest.json.
    #[arg(long, default_value = "out")]
    out_dir: PathBuf,
    /// Largest accepted deviation for `compare`.
    #[arg(long, default_value_t = 0.02)]
    tolerance: f64,
    /// Worker threads for `sweep`.
    #[arg(long, env = "SIM_WORKERS", default_value_t = 1)]
    workers: usize,
}

#[derive(Subcommand)]
enum Command {
    /// Time series, entropy profiles and the delay-line photon distribution.
    Run(Common),
    /// Output spectrum and g2 at the end of the run.
    Spectrum(Common),
    /// Steady-state grid over the feedback phase and the delay.
    Sweep {
        #[command(flatten)]
        common: Common,
        /// Number of phases in [0, 2π).
        #[arg(long, default_value_t = 16)]
        phi_steps: usize,
        /// Values of γτ.
        #[arg(long, value_delimiter = ',', default_value = "0.2,1,2,4")]
        taus: Vec<f64>,
    },
    /// Deviation from the Markovian reference solution.
    Compare(Common),
}

fn dispatch(command: Command) -> CliResult<()> {
    match command {
        Command::Run(c) => commands::cmd_run(&output::parse_config(&c.config)?, &c.out_dir),
        Command::Spectrum(c) => commands::cmd_spectrum(&output::parse_config(&c.config)?, &c.out_dir),
        Command::Sweep { common: c, phi_steps, taus } => {
            commands::cmd_sweep(&output::parse_config(&c.config)?, &c.out_dir, c.workers, phi_steps, &taus)
        }
        Command::Compare(c) => {
            commands::cmd_compare(&output::parse_config(&c.config)?, &c.out_dir, c.tolerance).map(|_| ())
        }
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match dispatch(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("{e}");
            e.exit_code()
        }
    }
}
