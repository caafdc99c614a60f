//! Library surface of the scenario runner, shared by the binary and the
//! integration tests.

pub mod experiments;
pub mod report;
pub mod scenario;

use std::time::Instant;

use anyhow::{Context, Result};

use report::{resolve_output_dir, RunReport};
use scenario::Scenario;

/// Executes a parsed scenario: dispatches the experiment, then writes
/// `results.json` and `samples.csv` into the output directory (the
/// scenario's own, or the environment override).
pub fn run_scenario(scenario: &Scenario) -> Result<RunReport> {
    run_scenario_in(scenario, None)
}

/// Like [`run_scenario`] with an explicit output directory, leaving the
/// scenario text (and so its digest) untouched.
pub fn run_scenario_in(
    scenario: &Scenario,
    out_override: Option<&std::path::Path>,
) -> Result<RunReport> {
    let started = Instant::now();
    let out_dir = match out_override {
        Some(p) => p.to_path_buf(),
        None => resolve_output_dir(&scenario.output_dir),
    };
    std::fs::create_dir_all(&out_dir)
        .with_context(|| format!("creating output dir {}", out_dir.display()))?;
    let output = experiments::run(scenario)?;
    let csv_path = out_dir.join("samples.csv");
    output.csv.write_to(&csv_path)?;
    let report = RunReport {
        scenario_digest: scenario.digest(),
        experiment: scenario.experiment.name().to_string(),
        wall_time_s: started.elapsed().as_secs_f64(),
        verdicts: output.verdicts,
        artifacts: vec![
            csv_path.display().to_string(),
            out_dir.join("results.json").display().to_string(),
        ],
        results: output.results,
    };
    let json_path = out_dir.join("results.json");
    std::fs::write(&json_path, serde_json::to_string_pretty(&report)?)?;
    Ok(report)
}
