use irb_core::calibration::{AmplificationData, CalibratedGates, CalibrationResult, DragSweep};
use irb_core::modelsel::{ModelKind, ModelReport};
use irb_core::protocols::{DecayFit, DecaySeries, IrbResult};
use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;

/// Bumped whenever the report layout changes incompatibly.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Command {
    Rb,
    Irb,
    Calibrate,
    SweepGateTime,
    Classify,
}

impl Command {
    pub fn name(self) -> &'static str {
        match self {
            Command::Rb => "rb",
            Command::Irb => "irb",
            Command::Calibrate => "calibrate",
            Command::SweepGateTime => "sweep-gate-time",
            Command::Classify => "classify",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Report {
    pub schema_version: u32,
    pub software_version: String,
    pub command: Command,
    /// Master seed of the random sequences; 0 for commands without any.
    pub seed: u64,
    /// Effective configuration after command-line overrides. Feeding the
    /// report back as `--config` repeats the run.
    pub config: ExperimentConfig,
    pub wall_clock_seconds: f64,
    pub results: Results,
}

impl Report {
    pub fn new(
        command: Command,
        seed: u64,
        config: ExperimentConfig,
        wall_clock_seconds: f64,
        results: Results,
    ) -> Self {
        Self {
            schema_version: SCHEMA_VERSION,
            software_version: env!("CARGO_PKG_VERSION").to_string(),
            command,
            seed,
            config,
            wall_clock_seconds,
            results,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum Results {
    Rb {
        series: DecaySeries,
        fit: DecayFit,
        calibration: Option<CalibratedGates>,
    },
    Irb {
        irb: IrbResult,
        /// Absent when fewer than five repeat counts were measured.
        classification: Option<ModelReport>,
        calibration: Option<CalibratedGates>,
    },
    Calibrate {
        calibration: CalibratedGates,
        /// Amplification data measured with the final pulses.
        final_data: Vec<AmplificationData>,
        drag_sweep: Option<DragSweep>,
        axis_scans: Vec<AxisScan>,
    },
    SweepGateTime {
        points: Vec<SweepPoint>,
    },
    Classify {
        cases: Vec<ClassifiedCase>,
        table: ProbabilityTable,
    },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct AxisScan {
    pub gate_length: f64,
    /// `(buffer, fit)` pairs in scan order.
    pub points: Vec<(f64, CalibrationResult)>,
}

/// RB error per generator pulse for one series at one gate length.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SweepEntry {
    pub error_per_gate: f64,
    /// Half-width of the 95% interval of `error_per_gate`.
    pub error_halfwidth: f64,
    pub alpha: f64,
    pub drag_lambda: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SweepPoint {
    pub gate_length: f64,
    pub drag_off: SweepEntry,
    pub drag_on: SweepEntry,
    pub drive_dephasing: SweepEntry,
    /// Average infidelity of pure T1/T2 decay over one pulse slot.
    pub coherence_limit: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ClassifiedCase {
    pub label: String,
    pub report: ModelReport,
}

/// Relative probabilities and AIC values, models by cases.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ProbabilityTable {
    pub models: Vec<ModelKind>,
    pub cases: Vec<String>,
    /// `probabilities[model][case]`.
    pub probabilities: Vec<Vec<f64>>,
    pub aic: Vec<Vec<f64>>,
}

impl ProbabilityTable {
    pub fn build(cases: &[ClassifiedCase]) -> Self {
        let models = ModelKind::ALL.to_vec();
        let pick = |f: fn(&irb_core::modelsel::ModelEntry) -> f64| -> Vec<Vec<f64>> {
            models
                .iter()
                .map(|m| cases.iter().map(|c| f(c.report.entry(*m))).collect())
                .collect()
        };
        Self {
            cases: cases.iter().map(|c| c.label.clone()).collect(),
            probabilities: pick(|e| e.probability),
            aic: pick(|e| e.aic),
            models,
        }
    }

    /// Plain-text rendering for the terminal.
    pub fn render(&self) -> String {
        let mut out = format!("{:<10}", "model");
        for c in &self.cases {
            out.push_str(&format!(" {c:>14}"));
        }
        out.push('\n');
        for (m, row) in self.models.iter().zip(&self.probabilities) {
            out.push_str(&format!("{:<10}", m.to_string()));
            for p in row {
                out.push_str(&format!(" {p:>14.4}"));
            }
            out.push('\n');
        }
        out
    }
}
