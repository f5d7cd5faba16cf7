use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use hypstokes_lab::{run_to_dir, ExperimentConfig, ExperimentKind, LabError};

#[derive(Parser)]
#[command(name = "hypstokes", version, about = "Damped hyperbolic Stokes experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(clap::Args)]
struct Common {
    /// TOML experiment config; defaults are used when omitted.
    config: Option<PathBuf>,
    /// Output directory (overrides `output_dir` in the config).
    #[arg(short, long)]
    out: Option<PathBuf>,
}

#[derive(Subcommand)]
enum Command {
    /// Trace one generalized ray.
    Trace(Common),
    /// Sampled geometric control check.
    Gcc(Common),
    /// Damped modal evolution and decay fit.
    Simulate(Common),
    /// Spectrum of the damped generator.
    Spectrum(Common),
    /// Resolvent sweep along the imaginary axis.
    Resolvent(Common),
    /// Observability Gramian.
    Observability(Common),
    /// Penalized Lamé convergence study.
    Lame(Common),
    /// Per-mode boundary trace diagnostics.
    Diagnostics(Common),
}

impl Command {
    fn split(self) -> (ExperimentKind, Common) {
        match self {
            Command::Trace(c) => (ExperimentKind::Trace, c),
            Command::Gcc(c) => (ExperimentKind::Gcc, c),
            Command::Simulate(c) => (ExperimentKind::Simulate, c),
            Command::Spectrum(c) => (ExperimentKind::Spectrum, c),
            Command::Resolvent(c) => (ExperimentKind::Resolvent, c),
            Command::Observability(c) => (ExperimentKind::Observability, c),
            Command::Lame(c) => (ExperimentKind::Lame, c),
            Command::Diagnostics(c) => (ExperimentKind::Diagnostics, c),
        }
    }
}

fn main() -> ExitCode {
    let (kind, common) = Cli::parse().command.split();
    match execute(kind, common) {
        Ok(paths) => {
            for p in paths {
                println!("{}", p.display());
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("hypstokes {kind}: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

fn execute(kind: ExperimentKind, common: Common) -> Result<Vec<PathBuf>, LabError> {
    let cfg = match &common.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    let dir = common.out.unwrap_or_else(|| cfg.output_dir.clone());
    run_to_dir(kind, &cfg, &dir)
}
