//! `dmdt`: figure data for the diversity-multiplexing-delay toolkit as CSV.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use dmdt_cli::commands;
use dmdt_cli::config::RunConfig;
use dmdt_cli::error::CliResult;

#[derive(Parser)]
#[command(name = "dmdt", version, about)]
struct Cli {
    #[command(subcommand)]
    command: Command,

    /// TOML run configuration; defaults are used when omitted.
    #[arg(long, global = true)]
    config: Option<PathBuf>,

    /// Output directory (created if missing).
    #[arg(long, global = true, default_value = ".")]
    out: PathBuf,

    /// Overrides `sim.seed`.
    #[arg(long, global = true)]
    seed: Option<u64>,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Tradeoff curves d*(r/L) and their vertices.
    Tradeoff,
    /// Source and channel exponent lines and the high-SNR optimum.
    Exponent,
    /// Total distortion over r at finite SNR, with its argmin.
    FiniteSnr,
    /// Video coder distortion per number of multiplexing antennas.
    Video,
    /// Optimal ARQ policies, one LP per deadline.
    Mdp,
    /// Every fixed (r, L) policy against the adaptive one.
    Compare,
    /// Monte-Carlo run of a policy, checked against its exact value.
    Simulate,
}

fn execute(cli: &Cli) -> CliResult<()> {
    let mut cfg = match &cli.config {
        Some(path) => RunConfig::load(path)?,
        None => RunConfig::default(),
    };
    if let Some(seed) = cli.seed {
        cfg.sim.seed = seed;
    }
    cfg.validate()?;
    std::fs::create_dir_all(&cli.out)?;
    let out = cli.out.as_path();
    match cli.command {
        Command::Tradeoff => commands::tradeoff(&cfg, out),
        Command::Exponent => commands::exponent(&cfg, out),
        Command::FiniteSnr => commands::finite_snr(&cfg, out),
        Command::Video => commands::video(&cfg, out),
        Command::Mdp => commands::mdp(&cfg, out),
        Command::Compare => commands::compare(&cfg, out),
        Command::Simulate => commands::simulate(&cfg, out),
    }
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match execute(&cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
