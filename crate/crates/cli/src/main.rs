use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use roachlab::config::{read_config, RunConfig};
use roachlab::output::write_all;
use roachlab::pipeline::{execute, Command};
use roachlab::Error;

#[derive(Parser)]
#[command(
    name = "roachlab",
    version,
    about = "Aggregation/dispersal reaction-diffusion experiments"
)]
struct Cli {
    #[command(subcommand)]
    command: Cmd,
    /// TOML configuration; defaults apply when omitted
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Output directory (overrides [output] dir)
    #[arg(long, global = true)]
    out: Option<PathBuf>,
    /// Noise seed (overrides [ic] seed)
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Print nothing on success
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Cmd {
    /// Time integration with snapshot and time-series output
    Simulate,
    /// Largest growth rate of the constant state over a parameter range
    Linstab,
    /// Neutral curves in the (parameter, D) plane
    NeutralCurve,
    /// Steady-state branches with fold, pitchfork and Hopf detection
    Continue,
    /// Three-component runs against the fast-reaction limit
    EpsSweep,
}

impl From<Cmd> for Command {
    fn from(c: Cmd) -> Self {
        match c {
            Cmd::Simulate => Command::Simulate,
            Cmd::Linstab => Command::Linstab,
            Cmd::NeutralCurve => Command::NeutralCurve,
            Cmd::Continue => Command::Continue,
            Cmd::EpsSweep => Command::EpsSweep,
        }
    }
}

fn load(cli: &Cli) -> Result<RunConfig, Error> {
    let text = match &cli.config {
        Some(path) => {
            std::fs::read_to_string(path).map_err(|e| Error::Config(format!("cannot read {}: {e}", path.display())))?
        }
        None => String::new(),
    };
    let mut cfg = read_config(&text)?;
    if let Some(seed) = cli.seed {
        cfg = cfg.with_seed(seed);
    }
    if let Some(dir) = &cli.out {
        cfg.output.dir = dir.clone();
    }
    cfg.validate()?;
    Ok(cfg)
}

fn run(cli: &Cli) -> Result<Vec<PathBuf>, Error> {
    let cfg = load(cli)?;
    let artifacts = execute(cli.command.into(), &cfg)?;
    write_all(&cfg.output.dir, &artifacts)
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(&cli) {
        Ok(paths) => {
            if !cli.quiet {
                for p in paths {
                    println!("{}", p.display());
                }
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_numerical() { 2 } else { 1 })
        }
    }
}
