//! Scenario runner: validates and executes experiment configurations,
//! emitting a JSON report and deterministic CSV rows.
//!
//! Exit codes: 0 all verdicts pass, 2 verdict failures, 1 errors.

use std::path::PathBuf;
use std::process::ExitCode;

use anyhow::{Context, Result};
use clap::{Parser, Subcommand};

use fatou_cli::scenario::{ExperimentKind, Scenario};
use fatou_cli::{run_scenario, report::RunReport};

#[derive(Parser)]
#[command(name = "fatou-lab", about = "Boundary-dynamics experiment runner")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario file and write results.json + samples.csv.
    Run { scenario: PathBuf },
    /// Parse and validate a scenario file without running it.
    Validate { scenario: PathBuf },
    /// List the available experiments.
    ListExperiments,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match cli.command {
        Command::ListExperiments => {
            for (_, line) in ExperimentKind::ALL {
                println!("{line}");
            }
            ExitCode::SUCCESS
        }
        Command::Validate { scenario } => match load(&scenario) {
            Ok(s) => {
                println!("ok: digest {}", s.digest());
                ExitCode::SUCCESS
            }
            Err(e) => {
                eprintln!("invalid scenario: {e:#}");
                ExitCode::FAILURE
            }
        },
        Command::Run { scenario } => match run(&scenario) {
            Ok(report) => {
                for v in &report.verdicts {
                    println!(
                        "{} {}: {}",
                        if v.pass { "PASS" } else { "FAIL" },
                        v.name,
                        v.detail
                    );
                }
                if report.all_pass() {
                    ExitCode::SUCCESS
                } else {
                    ExitCode::from(2)
                }
            }
            Err(e) => {
                eprintln!("error: {e:#}");
                ExitCode::FAILURE
            }
        },
    }
}

fn load(path: &PathBuf) -> Result<Scenario> {
    let text = std::fs::read_to_string(path)
        .with_context(|| format!("reading scenario {}", path.display()))?;
    Ok(Scenario::parse(&text)?)
}

fn run(path: &PathBuf) -> Result<RunReport> {
    let scenario = load(path)?;
    run_scenario(&scenario)
}
