use clap::{Parser, Subcommand};
use platoon_cli::commands::{self, CliError};
use platoon_cli::scenario_file::Overrides;
use platoon_cli::verify::Suite;
use std::path::PathBuf;
use std::process::ExitCode;

#[derive(Parser)]
#[command(name = "platoon", version)]
#[command(about = "Safe leader-follower platoon consensus simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Simulate a scenario file and write CSV, summary, and SVG plots.
    Run {
        /// Scenario document (TOML).
        scenario: PathBuf,
        /// Output directory for trajectory.csv, summary.txt, and plots.
        #[arg(long, default_value = "out")]
        out: PathBuf,
        /// Override the duration (s).
        #[arg(long)]
        t_end: Option<f64>,
        /// Override the Euler step (s).
        #[arg(long)]
        dt: Option<f64>,
        /// Override every follower's speedup factor.
        #[arg(long)]
        alpha: Option<f64>,
        /// Disable the safety filter.
        #[arg(long)]
        no_safety: bool,
    },
    /// Run a verification suite: qp | jacobian | graph | euler | alpha-sweep.
    Verify {
        /// Suite name.
        suite: String,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Run {
            scenario,
            out,
            t_end,
            dt,
            alpha,
            no_safety,
        } => {
            let overrides = Overrides {
                t_end,
                dt,
                alpha,
                disable_safety: no_safety,
            };
            commands::cmd_run(&scenario, &out, &overrides)
        }
        Command::Verify { suite } => {
            let suite = Suite::parse(&suite).ok_or_else(|| {
                CliError::Input(format!(
                    "unknown suite \"{suite}\"; expected one of: {}",
                    Suite::all_names().join(", ")
                ))
            })?;
            commands::cmd_verify(suite)
        }
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
