use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};

use mavforce_cli::commands::{cmd_estimate, cmd_plot, cmd_simulate, CliError, SimulateOptions};

#[derive(Parser)]
#[command(name = "mavforce", version, about = "Hexacopter wrench estimation and admittance control simulator")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run a scenario and write the CSV log and event file.
    Simulate {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Overrides the seed in the config.
        #[arg(long)]
        seed: Option<u64>,
        /// Overrides the duration in the config, s.
        #[arg(long)]
        duration_override: Option<f64>,
    },
    /// Replay the estimator over a logged run.
    Estimate {
        /// Log written by `simulate`.
        log: PathBuf,
        /// Scenario file holding the vehicle and filter parameters.
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Render log channels to SVG.
    Plot {
        log: PathBuf,
        #[arg(long)]
        out: PathBuf,
        #[arg(long, value_delimiter = ',', default_value = "F_ext")]
        channels: Vec<String>,
    },
}

fn run(cli: Cli) -> Result<(), CliError> {
    match cli.command {
        Command::Simulate { config, out, seed, duration_override } => {
            let opts = SimulateOptions { seed, duration_override };
            for path in cmd_simulate(&config, &out, &opts)? {
                println!("wrote {}", path.display());
            }
        }
        Command::Estimate { log, config, out } => {
            let rows = cmd_estimate(&log, &config, &out)?;
            println!("wrote {} ({rows} rows)", out.display());
        }
        Command::Plot { log, out, channels } => {
            let panels = cmd_plot(&log, &out, &channels)?;
            println!("wrote {} ({panels} panels)", out.display());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    match run(Cli::parse()) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
