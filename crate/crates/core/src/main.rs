use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use acousticbc::runner::{run_file, Command, RunOptions};
use acousticbc::Error;

/// Modal acoustic simulations with membrane boundaries, and their audits.
#[derive(Parser, Debug)]
#[command(author, version, about, long_about = None)]
struct Cli {
    /// Multiplies every audit tolerance.
    #[arg(long, global = true, default_value_t = 1.0)]
    tol_scale: f64,

    #[command(subcommand)]
    command: Cmd,
}

#[derive(Subcommand, Debug)]
enum Cmd {
    /// Evolve the configured modes and audit the trajectories.
    Simulate { config: PathBuf },
    /// Run the refinement ladder named in the config.
    Convergence { config: PathBuf },
    /// Compare evolve-then-map with map-then-evolve for the configured model pair.
    Equivalence { config: PathBuf },
    /// Run the full audit battery.
    Verify { config: PathBuf },
}

fn exit_code(e: &Error) -> u8 {
    match e {
        Error::ConfigParse(_) | Error::Validation { .. } | Error::AssumptionAViolated { .. } => 2,
        _ => 3,
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let (cmd, config) = match cli.command {
        Cmd::Simulate { config } => (Command::Simulate, config),
        Cmd::Convergence { config } => (Command::Convergence, config),
        Cmd::Equivalence { config } => (Command::Equivalence, config),
        Cmd::Verify { config } => (Command::Verify, config),
    };
    let result = RunOptions::from_env(cli.tol_scale).and_then(|opts| run_file(cmd, &config, &opts));
    match result {
        Ok(report) => {
            for f in &report.files {
                println!("wrote {}", f.display());
            }
            if report.passed {
                println!("all audits passed");
                ExitCode::SUCCESS
            } else {
                eprintln!("some audits failed");
                ExitCode::from(1)
            }
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code(&e))
        }
    }
}
