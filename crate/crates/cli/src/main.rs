use std::process::ExitCode;

use clap::{Parser, Subcommand};

mod commands;
mod config;
mod output;

use config::{Command, Flags, RunConfig};

#[derive(Parser)]
#[command(
    name = "dqw",
    version,
    about = "Two quantum walkers under a common dephasing bath"
)]
struct Cli {
    #[command(subcommand)]
    command: Sub,
}

#[derive(Subcommand)]
enum Sub {
    /// Joint site probabilities P(s1, s2) per time.
    Evolve(Flags),
    /// Purity, entropy, coherence and mirror correlations per time.
    Measures(Flags),
    /// Geometric discord bound, totals and per-site breakdown.
    Gqd(Flags),
    /// Wigner function on the enlarged lattice.
    Wigner(Flags),
    /// Measures and discord, parallel over time points.
    Sweep(Flags),
    /// Self-check suite; exits non-zero if any check fails.
    Validate(Flags),
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (command, flags) = match cli.command {
        Sub::Evolve(f) => (Command::Evolve, f),
        Sub::Measures(f) => (Command::Measures, f),
        Sub::Gqd(f) => (Command::Gqd, f),
        Sub::Wigner(f) => (Command::Wigner, f),
        Sub::Sweep(f) => (Command::Sweep, f),
        Sub::Validate(f) => (Command::Validate, f),
    };
    let cfg = match RunConfig::resolve(command, &flags) {
        Ok(cfg) => cfg,
        Err(e) => {
            eprintln!("error: {e:#}");
            return ExitCode::from(2);
        }
    };
    if let Err(e) = rayon::ThreadPoolBuilder::new()
        .num_threads(cfg.threads)
        .build_global()
    {
        eprintln!("error: thread pool: {e}");
        return ExitCode::FAILURE;
    }
    let result = match command {
        Command::Evolve => commands::evolve(&cfg).map(|_| true),
        Command::Measures => commands::measures(&cfg).map(|_| true),
        Command::Gqd => commands::gqd(&cfg).map(|_| true),
        Command::Wigner => commands::wigner(&cfg).map(|_| true),
        Command::Sweep => commands::sweep(&cfg).map(|_| true),
        Command::Validate => commands::validate(&cfg),
    };
    match result {
        Ok(true) => ExitCode::SUCCESS,
        Ok(false) => ExitCode::FAILURE,
        Err(e) => {
            eprintln!("error: {e:#}");
            ExitCode::FAILURE
        }
    }
}
