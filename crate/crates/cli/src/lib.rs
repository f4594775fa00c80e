//! Command implementations behind the `irb-lab` binary.

pub mod commands;
pub mod config;
mod datasets;
pub mod output;
pub mod report;

use std::path::{Path, PathBuf};

pub use commands::{
    alpha_csv, bundled_config, bundled_epsilons, bundled_inputs, cmd_calibrate, cmd_classify, cmd_irb, cmd_rb,
    cmd_sweep_gate_time, ClassifyInput, Outcome,
};
pub use config::{config_schema, BackendKind, ExperimentConfig};
pub use report::{Command, Report, Results, SCHEMA_VERSION};

/// Failure of a command, with its process exit code.
#[derive(Debug, thiserror::Error)]
pub enum CliError {
    #[error("config error: {0}")]
    Config(String),
    #[error(transparent)]
    Core(#[from] irb_core::Error),
    #[error("i/o error: {0}")]
    Io(String),
}

impl CliError {
    /// 2 config, 3 simulation, 4 fit; 1 for anything else.
    pub fn exit_code(&self) -> i32 {
        use irb_core::Error as E;
        match self {
            CliError::Config(_) => 2,
            CliError::Core(E::InvalidArgument(_)) => 2,
            CliError::Core(E::Simulation { .. }) => 3,
            CliError::Core(E::Fit { .. } | E::Calibration { .. } | E::Range(_)) => 4,
            CliError::Io(_) => 1,
        }
    }
}

/// Exit code for a successful run whose classification was inconclusive.
pub const EXIT_INCONCLUSIVE: i32 = 5;

/// Paths of the report and CSV for `command`.
pub fn output_paths(cfg: &ExperimentConfig, command: Command) -> (PathBuf, PathBuf) {
    let dir = cfg.output.dir.clone().unwrap_or_else(|| PathBuf::from("."));
    let stem = cfg.output.stem.clone().unwrap_or_else(|| command.name().to_string());
    (dir.join(format!("{stem}.json")), dir.join(format!("{stem}.csv")))
}

/// Writes the report and CSV of `outcome`; returns their paths.
pub fn write_outcome(outcome: &Outcome) -> Result<(PathBuf, PathBuf), CliError> {
    let (json_path, csv_path) = output_paths(&outcome.report.config, outcome.report.command);
    let mut json = serde_json::to_string_pretty(&outcome.report).map_err(|e| CliError::Io(e.to_string()))?;
    json.push('\n');
    output::write_atomic(&json_path, json.as_bytes())?;
    output::write_atomic(&csv_path, output::csv_string(&outcome.rows)?.as_bytes())?;
    Ok((json_path, csv_path))
}

/// Caps the global thread pool from `IRB_LAB_THREADS` (0 or unset: one
/// thread per core).
pub fn init_threads_from_env() -> Result<(), CliError> {
    let Ok(v) = std::env::var("IRB_LAB_THREADS") else {
        return Ok(());
    };
    let n: usize = v
        .trim()
        .parse()
        .map_err(|_| CliError::Config(format!("IRB_LAB_THREADS must be a non-negative integer, got {v:?}")))?;
    if n > 0 {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Config(format!("cannot size thread pool: {e}")))?;
    }
    Ok(())
}

/// Loads `path` or falls back to the default config.
pub fn load_config(path: Option<&Path>) -> Result<ExperimentConfig, CliError> {
    match path {
        Some(p) => ExperimentConfig::load(p),
        None => Ok(ExperimentConfig::default()),
    }
}
