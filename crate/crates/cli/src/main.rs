//! `stackelberg run <config>`, `validate <config>`, `report <run-dir>`.
//!
//! Exit codes: 0 success, 2 configuration error, 3 solver failure.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use stackelberg_core::harness_cli::{output_root, parse_config, run_experiment, RunRecord};
use stackelberg_core::Error;

#[derive(Parser)]
#[command(name = "stackelberg", version, about = "Robust Stackelberg control experiments")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the experiment described by a TOML config.
    Run { config: PathBuf },
    /// Parse and validate a config without running it.
    Validate { config: PathBuf },
    /// Summarise a finished run directory and check its artifacts.
    Report { run_dir: PathBuf },
}

const CONFIG_ERROR: u8 = 2;
const SOLVER_ERROR: u8 = 3;

fn exit_code(e: &Error) -> u8 {
    if e.is_config() {
        CONFIG_ERROR
    } else {
        SOLVER_ERROR
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::Validate { config } => match parse_config(&config) {
            Ok(cfg) => {
                println!("{}: ok ({}, hash {})", config.display(), cfg.experiment, cfg.hash());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("{}: {e}", config.display());
                ExitCode::from(CONFIG_ERROR)
            }
        },
        Command::Run { config } => {
            let cfg = match parse_config(&config) {
                Ok(cfg) => cfg,
                Err(e) => {
                    eprintln!("{}: {e}", config.display());
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            match run_experiment(&cfg) {
                Ok(record) => {
                    print!("{}", record.summary());
                    println!("written to {}", stackelberg_core::harness_cli::run_dir(&output_root(), &cfg).display());
                    ExitCode::SUCCESS
                }
                Err(e) => {
                    eprintln!("run failed: {e}");
                    ExitCode::from(exit_code(&e))
                }
            }
        }
        Command::Report { run_dir } => {
            let record = match RunRecord::load(&run_dir) {
                Ok(r) => r,
                Err(e) => {
                    eprintln!("{e}");
                    return ExitCode::from(CONFIG_ERROR);
                }
            };
            print!("{}", record.summary());
            if let Err(e) = record.check_artifacts(&run_dir) {
                eprintln!("{e}");
                return ExitCode::from(CONFIG_ERROR);
            }
            if record.complete {
                ExitCode::SUCCESS
            } else {
                ExitCode::from(SOLVER_ERROR)
            }
        }
    }
}
