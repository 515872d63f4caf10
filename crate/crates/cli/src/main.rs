//! `stargraph` command line: forward, inverse and stability runs with
//! deterministic JSON and CSV reports.

mod commands;
mod config;
mod report;

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stargraph::Error;

use config::RunConfig;

/// Environment variable holding the number of worker threads.
const WORKERS_VAR: &str = "STARGRAPH_WORKERS";

#[derive(Parser)]
#[command(name = "stargraph", version, about = "Spectral problems on equilateral star graphs")]
struct Cli {
    #[command(subcommand)]
    command: Command,
    /// Flat `key = value` configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    /// Directory for the reports.
    #[arg(long, global = true, default_value = "out")]
    out: PathBuf,
    #[arg(long, global = true)]
    seed: Option<u64>,
    /// Number of edges.
    #[arg(long, global = true)]
    m: Option<usize>,
    #[arg(long, global = true)]
    grid_points: Option<usize>,
    /// Cosine modes of random potentials.
    #[arg(long, global = true)]
    modes: Option<usize>,
    #[arg(long, global = true)]
    quiet: bool,
}

#[derive(Subcommand, Clone, Copy)]
enum Command {
    /// Δ and Δ_j on a real λ grid.
    CharScan,
    /// Indexed eigenvalues.
    Spectrum,
    /// Spectra with a Neumann condition at one pendant vertex.
    AuxSpectra,
    /// Weight numbers; also writes the data for `reconstruct`.
    Weights,
    /// Paley–Wiener remainders of Δ and Δ_k.
    PwExtract,
    /// Cauchy-data coefficients of the last edge.
    Cauchy,
    /// Finite-difference eigenvalues next to the solver's.
    Oracle,
    /// Potentials from eigenvalues and weight numbers.
    Reconstruct,
    /// Weight numbers from the main and auxiliary spectra.
    Ip1Convert,
    /// Stability ratios over random pairs.
    Stability,
}

impl Command {
    fn name(self) -> &'static str {
        let i = match self {
            Command::CharScan => 0,
            Command::Spectrum => 1,
            Command::AuxSpectra => 2,
            Command::Weights => 3,
            Command::PwExtract => 4,
            Command::Cauchy => 5,
            Command::Oracle => 6,
            Command::Reconstruct => 7,
            Command::Ip1Convert => 8,
            Command::Stability => 9,
        };
        commands::COMMANDS[i]
    }
}

fn exit_code(e: &Error) -> u8 {
    if e.is_input_error() {
        2
    } else if e.is_io_error() {
        4
    } else {
        3
    }
}

fn load_config(cli: &Cli) -> Result<RunConfig, Error> {
    let mut cfg = match &cli.config {
        Some(path) => {
            let text = std::fs::read_to_string(path).map_err(|e| Error::Io {
                path: path.display().to_string(),
                source: e,
            })?;
            RunConfig::parse(&text)?
        }
        None => RunConfig::defaults(),
    };
    if let Some(s) = cli.seed {
        cfg.set("seed", &s.to_string())?;
    }
    if let Some(m) = cli.m {
        cfg.set("m", &m.to_string())?;
    }
    if let Some(g) = cli.grid_points {
        cfg.set("grid_points", &g.to_string())?;
    }
    if let Some(n) = cli.modes {
        cfg.set("modes", &n.to_string())?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn init_workers() -> Result<(), Error> {
    let Ok(value) = std::env::var(WORKERS_VAR) else {
        return Ok(());
    };
    let n: usize = value
        .parse()
        .ok()
        .filter(|&n| n > 0)
        .ok_or_else(|| Error::InvalidInput(format!("{WORKERS_VAR} must be a positive integer, got `{value}`")))?;
    rayon::ThreadPoolBuilder::new()
        .num_threads(n)
        .build_global()
        .map_err(|e| Error::InvalidInput(e.to_string()))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let command = cli.command.name();
    let result = init_workers().and_then(|_| load_config(&cli)).and_then(|cfg| {
        let outcome = commands::run(command, &cfg)?;
        report::emit(&cli.out, command, &cfg, &outcome)?;
        Ok(outcome.summary)
    });
    match result {
        Ok(summary) => {
            if !cli.quiet {
                println!("{command}: {summary}");
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
