//! Command implementations behind the CLI: run a scenario and write its
//! artifacts, or execute a verification suite.

use crate::export;
use crate::plot;
use crate::scenario_file::{apply_overrides, Overrides, ScenarioFile, ScenarioFileError};
use crate::verify::{self, Suite};
use platoon_core::sim::{self, TerminationStatus};
use std::path::Path;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum CliError {
    /// Scenario loading, parsing, validation, or artifact I/O problems.
    #[error("{0}")]
    Input(String),
    /// The simulation aborted before t_end.
    #[error("simulation aborted: {0}")]
    Aborted(TerminationStatus),
    /// One or more verification checks failed.
    #[error("{failed} verification check(s) failed")]
    VerificationFailed { failed: usize },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Input(_) => 1,
            CliError::Aborted(_) => 2,
            CliError::VerificationFailed { .. } => 3,
        }
    }
}

impl From<ScenarioFileError> for CliError {
    fn from(e: ScenarioFileError) -> Self {
        CliError::Input(e.to_string())
    }
}

impl From<std::io::Error> for CliError {
    fn from(e: std::io::Error) -> Self {
        CliError::Input(e.to_string())
    }
}

/// Loads, overrides, runs, and writes trajectory.csv, summary.txt,
/// trajectory.svg, and distances.svg into `out_dir`.
pub fn cmd_run(
    scenario_path: &Path,
    out_dir: &Path,
    overrides: &Overrides,
) -> Result<(), CliError> {
    let file = ScenarioFile::load(scenario_path)?;
    let mut scenario = file.to_scenario()?;
    apply_overrides(&mut scenario, overrides);
    scenario
        .validate()
        .map_err(|e| CliError::Input(format!("after overrides: {e}")))?;

    let log = sim::run(&scenario).map_err(|e| CliError::Input(e.to_string()))?;

    std::fs::create_dir_all(out_dir)?;
    std::fs::write(out_dir.join("trajectory.csv"), export::csv_string(&log))?;
    if !log.records.is_empty() {
        let summary = sim::summarize(&log);
        let text = export::summary_text(&log, &summary, &scenario.reference);
        std::fs::write(out_dir.join("summary.txt"), &text)?;
        std::fs::write(
            out_dir.join("trajectory.svg"),
            plot::trajectory_svg(&log, &scenario.reference),
        )?;
        std::fs::write(out_dir.join("distances.svg"), plot::distances_svg(&log))?;
        print!("{text}");
    }

    match &log.status {
        TerminationStatus::Completed => Ok(()),
        status => Err(CliError::Aborted(status.clone())),
    }
}

/// Runs one verification suite, printing a pass/fail line per check.
pub fn cmd_verify(suite: Suite) -> Result<(), CliError> {
    let results = verify::run_suite(suite);
    let mut failed = 0;
    for r in &results {
        let mark = if r.passed { "PASS" } else { "FAIL" };
        println!("[{mark}] {} — {}", r.name, r.detail);
        if !r.passed {
            failed += 1;
        }
    }
    if failed > 0 {
        Err(CliError::VerificationFailed { failed })
    } else {
        Ok(())
    }
}
