//! Subcommand bodies. `main` only parses flags and maps errors to exit
//! codes.

use std::fs::File;
use std::io::BufWriter;
use std::path::{Path, PathBuf};

use mavforce_core::estimator::EstimatorError;
use mavforce_core::sim::{self, SimError, SimLog};

use crate::config::{load_config, ConfigError};
use crate::log::{self as logv1, FormatError};
use crate::plot::{self, PlotError};

#[derive(thiserror::Error, Debug)]
pub enum CliError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Format(#[from] FormatError),
    #[error(transparent)]
    Plot(#[from] PlotError),
    #[error("{path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Sim(SimError),
    #[error("replay failed at row {row}: {source}")]
    Replay {
        row: usize,
        #[source]
        source: EstimatorError,
    },
    #[error("divergence detected at t = {t:.3} s (separation {separation:.3} m); partial log written")]
    Divergence { t: f64, separation: f64 },
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Config(_) => 2,
            CliError::Divergence { .. } => 3,
            _ => 1,
        }
    }
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> CliError + '_ {
    move |source| CliError::Io {
        path: path.display().to_string(),
        source,
    }
}

fn create(path: &Path) -> Result<BufWriter<File>, CliError> {
    File::create(path).map(BufWriter::new).map_err(io_err(path))
}

/// `out.csv` → `out.<tag>.csv`.
pub fn sibling(out: &Path, tag: &str) -> PathBuf {
    let stem = out.file_stem().map(|s| s.to_string_lossy().into_owned()).unwrap_or_default();
    let ext = out.extension().map(|e| e.to_string_lossy().into_owned()).unwrap_or_else(|| "csv".into());
    out.with_file_name(format!("{stem}.{tag}.{ext}"))
}

/// Files written by `simulate`: one log per vehicle, then the event file.
pub fn output_paths(out: &Path, vehicles: usize) -> Vec<PathBuf> {
    let mut paths = vec![out.to_path_buf()];
    paths.extend((1..vehicles).map(|i| sibling(out, &format!("v{i}"))));
    paths.push(sibling(out, "events"));
    paths
}

pub fn write_sim_log(log: &SimLog, out: &Path) -> Result<Vec<PathBuf>, CliError> {
    let paths = output_paths(out, log.vehicles.len());
    for (v, path) in log.vehicles.iter().zip(&paths) {
        logv1::write_log(create(path)?, &v.frames).map_err(io_err(path))?;
    }
    let events = paths.last().expect("events path");
    logv1::write_events(create(events)?, &log.events).map_err(io_err(events))?;
    Ok(paths)
}

#[derive(Debug, Clone, Default)]
pub struct SimulateOptions {
    pub seed: Option<u64>,
    pub duration_override: Option<f64>,
}

pub fn cmd_simulate(config: &Path, out: &Path, opts: &SimulateOptions) -> Result<Vec<PathBuf>, CliError> {
    let mut cfg = load_config(config)?;
    if let Some(seed) = opts.seed {
        cfg.seed = seed;
    }
    if let Some(d) = opts.duration_override {
        cfg.duration = d;
        cfg.validate().map_err(|e| ConfigError::Invalid(e.0))?;
    }
    match sim::run(&cfg) {
        Ok(log) => write_sim_log(&log, out),
        Err(SimError::DivergenceDetected { t, separation, log }) => {
            write_sim_log(&log, out)?;
            Err(CliError::Divergence { t, separation })
        }
        Err(e) => Err(CliError::Sim(e)),
    }
}

pub fn cmd_estimate(log: &Path, config: &Path, out: &Path) -> Result<usize, CliError> {
    let cfg = load_config(config)?;
    let text = std::fs::read_to_string(log).map_err(io_err(log))?;
    let table = logv1::read_table(&text)?;
    let inputs = logv1::replay_inputs(&table)?;
    let times: Vec<f64> = inputs.iter().map(|(t, _, _)| *t).collect();
    let estimates = sim::replay(cfg.filter, cfg.vehicle, inputs.into_iter().map(|(_, z, n)| (z, n)))
        .map_err(|(k, source)| CliError::Replay { row: k + 1, source })?;
    let rows: Vec<_> = times.into_iter().zip(estimates).map(|(t, (w, p))| (t, w, p)).collect();
    logv1::write_estimates(create(out)?, &rows).map_err(io_err(out))?;
    Ok(rows.len())
}

pub fn cmd_plot(log: &Path, out: &Path, channels: &[String]) -> Result<usize, CliError> {
    let text = std::fs::read_to_string(log).map_err(io_err(log))?;
    let table = logv1::read_table(&text)?;
    Ok(plot::plot(&table, channels, out)?)
}
