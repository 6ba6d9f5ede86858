use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use ohx_cli::{execute, Command};

#[derive(Parser)]
#[command(
    name = "ohx",
    version,
    about = "Solve and certify the Ostrovsky-Hunter equation with x-dependent flux"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
}

#[derive(clap::Args)]
struct Io {
    /// INI configuration file.
    #[arg(long)]
    config: PathBuf,
    /// Output directory (overrides `output.dir`).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Cmd {
    /// Check the flux hypotheses on the configured sample box.
    ValidateFlux(Io),
    /// Solve once and write the snapshots.
    Run(Io),
    /// Solve, then run the estimate battery.
    Certify(Io),
    /// Viscosity sweep with successive L1 distances.
    Sweep(Io),
    /// Self-convergence study over doubling resolutions.
    Converge(Io),
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    let (command, io) = match cli.command {
        Cmd::ValidateFlux(io) => (Command::ValidateFlux, io),
        Cmd::Run(io) => (Command::Run, io),
        Cmd::Certify(io) => (Command::Certify, io),
        Cmd::Sweep(io) => (Command::Sweep, io),
        Cmd::Converge(io) => (Command::Converge, io),
    };
    let report = execute(command, &io.config, io.out.as_deref());
    if report.code == 0 {
        println!("{}", report.message);
    } else {
        eprintln!("{}", report.message);
    }
    if let Some(dir) = &report.out_dir {
        println!("artifacts in {}", dir.display());
    }
    ExitCode::from(report.code as u8)
}
