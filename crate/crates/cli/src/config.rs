use std::path::{Path, PathBuf};

use irb_core::calibration::CalibrationSchedule;
use irb_core::modelsel::ClassifyOptions;
use irb_core::protocols::{IrbConfig, RbConfig};
use irb_core::transmon::{DeviceParams, NoiseConfig, SimOptions};
use schemars::JsonSchema;
use serde::{Deserialize, Serialize};

use crate::CliError;

/// Which gate model the protocols run against.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, JsonSchema, clap::ValueEnum)]
#[serde(rename_all = "snake_case")]
pub enum BackendKind {
    /// Closed-form channels: rotation plus free decoherence per pulse slot.
    #[default]
    Exact,
    /// Three-level transmon master-equation simulation.
    Pulse,
}

/// Pulse shape defaults shared by all commands.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct GateDefaults {
    /// Pulse length in seconds (four Gaussian sigmas).
    pub gate_length: f64,
    /// Idle time after every pulse, seconds.
    pub buffer: f64,
    pub drag_lambda: f64,
    /// Run the closed-loop calibration before pulse-backend experiments.
    pub calibrate: bool,
}

impl Default for GateDefaults {
    fn default() -> Self {
        Self {
            gate_length: 16.7e-9,
            buffer: 0.0,
            drag_lambda: 0.5,
            calibrate: false,
        }
    }
}

/// Gate-length sweep settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    /// Gate lengths, seconds.
    pub gate_lengths: Vec<f64>,
    /// Drive-proportional dephasing coefficient for the third series.
    pub drive_dephasing_k: f64,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            gate_lengths: [10.0, 13.3, 16.7, 20.0, 30.0, 40.0, 50.0, 60.0]
                .iter()
                .map(|t| t * 1e-9)
                .collect(),
            drive_dephasing_k: 5e-4,
        }
    }
}

/// Extra measurements made by `calibrate`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(deny_unknown_fields, default)]
pub struct AxisConfig {
    /// Buffer times for the X-Y axis amplification scan, seconds. Empty
    /// skips the scan.
    pub buffers: Vec<f64>,
    /// Pulse lengths to scan; empty uses `gates.gate_length`.
    pub gate_lengths: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema, Default)]
#[serde(deny_unknown_fields, default)]
pub struct OutputConfig {
    /// Directory for the report and CSV; created if missing.
    pub dir: Option<PathBuf>,
    /// File stem; defaults to the command name.
    pub stem: Option<String>,
}

/// Complete experiment description. Every section is optional; the
/// default device is the reference transmon with T1/T2 decay switched on.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, JsonSchema)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub device: DeviceParams,
    pub noise: NoiseConfig,
    pub gates: GateDefaults,
    pub backend: BackendKind,
    pub sim: SimOptions,
    pub rb: RbConfig,
    pub irb: IrbConfig,
    pub calibration: CalibrationSchedule,
    pub axis: AxisConfig,
    pub sweep: SweepConfig,
    pub classify: ClassifyOptions,
    pub output: OutputConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            device: DeviceParams::reference(),
            noise: NoiseConfig::decoherence_only(),
            gates: GateDefaults::default(),
            backend: BackendKind::default(),
            sim: SimOptions::default(),
            rb: RbConfig::default(),
            irb: IrbConfig::default(),
            calibration: CalibrationSchedule::default(),
            axis: AxisConfig::default(),
            sweep: SweepConfig::default(),
            classify: ClassifyOptions::default(),
            output: OutputConfig::default(),
        }
    }
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<(), CliError> {
        self.device.validate()?;
        self.noise.validate()?;
        self.rb.validate()?;
        self.irb.validate()?;
        let g = &self.gates;
        if !(g.gate_length > 0.0 && g.gate_length.is_finite()) {
            return Err(CliError::Config("gates.gate_length must be positive".into()));
        }
        if !(g.buffer >= 0.0 && g.buffer.is_finite()) {
            return Err(CliError::Config("gates.buffer must be non-negative".into()));
        }
        if !g.drag_lambda.is_finite() {
            return Err(CliError::Config("gates.drag_lambda must be finite".into()));
        }
        if self.sweep.gate_lengths.iter().any(|t| !(*t > 0.0 && t.is_finite())) {
            return Err(CliError::Config("sweep.gate_lengths must be positive".into()));
        }
        if !(self.sweep.drive_dephasing_k >= 0.0) {
            return Err(CliError::Config("sweep.drive_dephasing_k must be non-negative".into()));
        }
        if self
            .axis
            .buffers
            .iter()
            .chain(&self.axis.gate_lengths)
            .any(|t| !(*t >= 0.0 && t.is_finite()))
        {
            return Err(CliError::Config("axis times must be non-negative".into()));
        }
        Ok(())
    }

    /// Parses a config file, or the config embedded in a report.
    pub fn from_json(text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("not valid JSON: {e}")))?;
        let is_report = value.get("schema_version").is_some() && value.get("config").is_some();
        let body = if is_report { value["config"].clone() } else { value };
        let cfg: Self = serde_json::from_value(body).map_err(|e| CliError::Config(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        Self::from_json(&text)
    }
}

/// JSON schema of [`ExperimentConfig`].
pub fn config_schema() -> serde_json::Value {
    serde_json::to_value(schemars::schema_for!(ExperimentConfig)).expect("schema serializes")
}
