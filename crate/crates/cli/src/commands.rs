use std::path::Path;
use std::time::Instant;

use irb_core::calibration::{
    axis_error_experiment, calibrate_all, drag_cal_sweep, AmplificationData, CalibratedGates, CalibrationSchedule,
    SequenceKind,
};
use irb_core::modelsel::{classify_irb, classify_with};
use irb_core::protocols::{irb_experiment, rb_experiment, Backend, ExactBackend, IrbResult, PulseBackend, RbConfig};
use irb_core::qchannel::{avg_gate_fidelity, Channel, Unitary2};
use irb_core::transmon::{GateSet, NoiseConfig};

use crate::config::{BackendKind, ExperimentConfig};
use crate::datasets;
use crate::output::PlotRow;
use crate::report::{AxisScan, ClassifiedCase, Command, ProbabilityTable, Report, Results, SweepEntry, SweepPoint};
use crate::CliError;

/// A finished command: the report and its plot rows.
#[derive(Debug, Clone)]
pub struct Outcome {
    pub report: Report,
    pub rows: Vec<PlotRow>,
    /// Some classification had a runner-up at or above the threshold.
    pub inconclusive: bool,
}

fn ns(t: f64) -> f64 {
    t * 1e9
}

/// Calibration settings with the gate section's length and buffer.
fn schedule_for(cfg: &ExperimentConfig, gate_length: f64) -> CalibrationSchedule {
    CalibrationSchedule {
        gate_length,
        buffer: cfg.gates.buffer,
        initial_drag_lambda: cfg.gates.drag_lambda,
        sim: cfg.sim,
        ..cfg.calibration.clone()
    }
}

/// The noise with injected angle errors removed: what a calibration on the
/// real device sees.
fn device_noise(noise: &NoiseConfig) -> NoiseConfig {
    NoiseConfig {
        overrotation_epsilon: 0.0,
        axis_skew: 0.0,
        ..*noise
    }
}

fn protocol_backend(cfg: &ExperimentConfig) -> Result<(Box<dyn Backend>, Option<CalibratedGates>), CliError> {
    let g = &cfg.gates;
    match cfg.backend {
        BackendKind::Exact => {
            let b = ExactBackend::from_model(&cfg.device, &cfg.noise, g.gate_length + g.buffer)?;
            Ok((Box::new(b), None))
        }
        BackendKind::Pulse => {
            let (gates, cal) = if g.calibrate {
                let cal = calibrate_all(
                    &cfg.device,
                    &device_noise(&cfg.noise),
                    &schedule_for(cfg, g.gate_length),
                )?;
                (cal.gates, Some(cal))
            } else {
                (GateSet::new(g.gate_length, g.buffer).with_drag(g.drag_lambda), None)
            };
            let b = PulseBackend::new(cfg.device, cfg.noise, gates, cfg.sim)?;
            Ok((Box::new(b), cal))
        }
    }
}

fn decay_rows(
    label: &str,
    series: &irb_core::protocols::DecaySeries,
    fit: &irb_core::protocols::DecayFit,
) -> Vec<PlotRow> {
    let mut rows = Vec::with_capacity(2 * series.x.len());
    for ((m, y), e) in series.x.iter().zip(&series.y_mean).zip(&series.y_stderr) {
        rows.push(PlotRow::new(label, *m as f64, *y, Some(*e)));
    }
    for m in &series.x {
        let y = fit.a * fit.alpha.powf(*m as f64) + fit.b;
        rows.push(PlotRow::new(format!("{label}_fit"), *m as f64, y, None));
    }
    rows
}

pub fn cmd_rb(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (backend, calibration) = protocol_backend(cfg)?;
    let (series, fit) = rb_experiment(&cfg.rb, backend.as_ref())?;
    let rows = decay_rows("survival", &series, &fit);
    let results = Results::Rb {
        series,
        fit,
        calibration,
    };
    Ok(Outcome {
        report: Report::new(
            Command::Rb,
            cfg.rb.seed,
            cfg.clone(),
            start.elapsed().as_secs_f64(),
            results,
        ),
        rows,
        inconclusive: false,
    })
}

fn irb_rows(irb: &IrbResult) -> Vec<PlotRow> {
    let mut rows = Vec::new();
    for (p, hw) in irb.points.iter().zip(irb.alpha_halfwidths()) {
        rows.push(PlotRow::new("alpha", p.n as f64, p.fit.alpha, Some(hw)));
    }
    for p in &irb.points {
        if let Some(r) = p.segment_ratio {
            rows.push(PlotRow::new("segment_ratio", p.n as f64, r, None));
        }
    }
    for p in &irb.points {
        rows.extend(decay_rows(&format!("survival_n{}", p.n), &p.series, &p.fit));
    }
    rows
}

pub fn cmd_irb(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let (backend, calibration) = protocol_backend(cfg)?;
    let irb = irb_experiment(&cfg.irb, backend.as_ref())?;
    let mut distinct = cfg.irb.repeats.clone();
    distinct.sort_unstable();
    distinct.dedup();
    let classification = if distinct.len() >= 5 {
        Some(classify_irb(&irb, &cfg.classify)?)
    } else {
        None
    };
    let inconclusive = classification.as_ref().is_some_and(|c| c.inconclusive);
    let rows = irb_rows(&irb);
    let results = Results::Irb {
        irb,
        classification,
        calibration,
    };
    Ok(Outcome {
        report: Report::new(
            Command::Irb,
            cfg.irb.base.seed,
            cfg.clone(),
            start.elapsed().as_secs_f64(),
            results,
        ),
        rows,
        inconclusive,
    })
}

pub fn cmd_calibrate(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    let noise = device_noise(&cfg.noise);
    let schedule = schedule_for(cfg, cfg.gates.gate_length);
    let calibration = calibrate_all(&cfg.device, &noise, &schedule)?;
    let backend = PulseBackend::new(cfg.device, noise, calibration.gates, cfg.sim)?;
    let mut rows = Vec::new();
    let mut final_data = Vec::new();
    for (label, kind) in [("half_pi", SequenceKind::HalfPi), ("pi", SequenceKind::Pi)] {
        let data = AmplificationData::measure(kind, &schedule.n_values, &backend)?;
        for (n, p) in data.n_values.iter().zip(&data.p0) {
            rows.push(PlotRow::new(label, *n as f64, *p, None));
        }
        final_data.push(data);
    }
    let drag_sweep = if schedule.calibrate_drag {
        let sweep = drag_cal_sweep(&schedule.lambda_grid, &backend, schedule.drag_repetitions)?;
        for (l, p) in sweep.lambdas.iter().zip(&sweep.p0) {
            rows.push(PlotRow::new("drag", *l, *p, None));
        }
        Some(sweep)
    } else {
        None
    };
    let mut axis_scans = Vec::new();
    if !cfg.axis.buffers.is_empty() {
        let lengths = if cfg.axis.gate_lengths.is_empty() {
            vec![cfg.gates.gate_length]
        } else {
            cfg.axis.gate_lengths.clone()
        };
        for len in lengths {
            let gates = if len == cfg.gates.gate_length {
                calibration.gates
            } else {
                calibrate_all(&cfg.device, &noise, &schedule_for(cfg, len))?.gates
            };
            let points = axis_error_experiment(&schedule.n_values, &cfg.axis.buffers, |b| {
                PulseBackend::new(cfg.device, noise, gates.with_buffer(b), cfg.sim)
            })?;
            let label = format!("axis_{:.2}ns", ns(len));
            for (b, r) in &points {
                let half = 0.5 * (r.epsilon_ci[1] - r.epsilon_ci[0]);
                let err = r.kind.implied_error(r.epsilon.abs() + half) - r.implied_gate_error;
                rows.push(PlotRow::new(label.clone(), ns(*b), r.implied_gate_error, Some(err)));
            }
            axis_scans.push(AxisScan {
                gate_length: len,
                points,
            });
        }
    }
    let results = Results::Calibrate {
        calibration,
        final_data,
        drag_sweep,
        axis_scans,
    };
    Ok(Outcome {
        report: Report::new(
            Command::Calibrate,
            0,
            cfg.clone(),
            start.elapsed().as_secs_f64(),
            results,
        ),
        rows,
        inconclusive: false,
    })
}

fn sweep_entry(rb: &RbConfig, backend: &PulseBackend) -> Result<SweepEntry, CliError> {
    let (_, fit) = rb_experiment(rb, backend)?;
    let scale = fit.r_generator / fit.r_clifford.max(f64::MIN_POSITIVE);
    Ok(SweepEntry {
        error_per_gate: fit.r_generator,
        error_halfwidth: 0.25 * (fit.alpha_ci95[1] - fit.alpha_ci95[0]) * scale,
        alpha: fit.alpha,
        drag_lambda: backend.gates().x90.drag_lambda,
    })
}

/// Coherence-limited average infidelity of one pulse slot.
pub fn coherence_limit(cfg: &ExperimentConfig, slot: f64) -> Result<f64, CliError> {
    let d = Channel::decoherence(slot, cfg.device.t1, cfg.device.t2)?;
    Ok(avg_gate_fidelity(&d, &Unitary2::identity()).error())
}

pub fn cmd_sweep_gate_time(cfg: &ExperimentConfig) -> Result<Outcome, CliError> {
    let start = Instant::now();
    // The drive-line filter makes every RB sequence one long waveform; it
    // only matters for the axis scans.
    let noise = NoiseConfig {
        drive_dephasing_k: 0.0,
        drive_filter_tau: 0.0,
        ..device_noise(&cfg.noise)
    };
    let driven = NoiseConfig {
        drive_dephasing_k: cfg.sweep.drive_dephasing_k,
        ..noise
    };
    let mut points = Vec::new();
    let mut rows = Vec::new();
    for &len in &cfg.sweep.gate_lengths {
        let on = calibrate_all(&cfg.device, &noise, &schedule_for(cfg, len))?;
        let off_schedule = CalibrationSchedule {
            calibrate_drag: false,
            initial_drag_lambda: 0.0,
            ..schedule_for(cfg, len)
        };
        let off = calibrate_all(&cfg.device, &noise, &off_schedule)?;
        let point = SweepPoint {
            gate_length: len,
            drag_off: sweep_entry(&cfg.rb, &PulseBackend::new(cfg.device, noise, off.gates, cfg.sim)?)?,
            drag_on: sweep_entry(&cfg.rb, &PulseBackend::new(cfg.device, noise, on.gates, cfg.sim)?)?,
            drive_dephasing: sweep_entry(&cfg.rb, &PulseBackend::new(cfg.device, driven, on.gates, cfg.sim)?)?,
            coherence_limit: coherence_limit(cfg, len + cfg.gates.buffer)?,
        };
        for (label, e) in [
            ("drag_off", point.drag_off),
            ("drag_on", point.drag_on),
            ("drive_dephasing", point.drive_dephasing),
        ] {
            rows.push(PlotRow::new(
                label,
                ns(len),
                1.0 - e.error_per_gate,
                Some(e.error_halfwidth),
            ));
        }
        rows.push(PlotRow::new(
            "coherence_limit",
            ns(len),
            1.0 - point.coherence_limit,
            None,
        ));
        points.push(point);
    }
    // Group rows by series for plotting.
    rows.sort_by(|a, b| a.series.cmp(&b.series).then(a.x.total_cmp(&b.x)));
    Ok(Outcome {
        report: Report::new(
            Command::SweepGateTime,
            cfg.rb.seed,
            cfg.clone(),
            start.elapsed().as_secs_f64(),
            Results::SweepGateTime { points },
        ),
        rows,
        inconclusive: false,
    })
}

/// `(n, alpha)` points with optional CI half-widths under a label.
#[derive(Debug, Clone, PartialEq)]
pub struct ClassifyInput {
    pub label: String,
    pub points: Vec<(usize, f64)>,
    pub halfwidths: Option<Vec<f64>>,
}

impl ClassifyInput {
    /// Reads an IRB report (JSON) or plot CSV. CSV rows of the `alpha`
    /// series are used when present, otherwise every row.
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
        let label = path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "input".into());
        if text.trim_start().starts_with('{') {
            Self::from_report(&label, &text)
        } else {
            Self::from_csv(&label, &text)
        }
    }

    pub fn from_report(label: &str, text: &str) -> Result<Self, CliError> {
        let value: serde_json::Value =
            serde_json::from_str(text).map_err(|e| CliError::Config(format!("not valid JSON: {e}")))?;
        let irb = value
            .get("results")
            .filter(|r| r.get("kind").and_then(|k| k.as_str()) == Some("irb"))
            .and_then(|r| r.get("irb"))
            .ok_or_else(|| CliError::Config("report has no IRB results".into()))?;
        let irb: IrbResult = serde_json::from_value(irb.clone()).map_err(|e| CliError::Config(e.to_string()))?;
        Ok(Self {
            label: label.to_string(),
            points: irb.alphas(),
            halfwidths: Some(irb.alpha_halfwidths()),
        })
    }

    pub fn from_csv(label: &str, text: &str) -> Result<Self, CliError> {
        #[derive(serde::Deserialize)]
        struct Row {
            x: f64,
            y: f64,
            y_err: Option<f64>,
            series: Option<String>,
        }
        let mut reader = csv::Reader::from_reader(text.as_bytes());
        let rows: Vec<Row> = reader
            .deserialize()
            .collect::<Result<_, _>>()
            .map_err(|e| CliError::Config(format!("bad CSV: {e}")))?;
        let has_alpha = rows.iter().any(|r| r.series.as_deref() == Some("alpha"));
        let rows: Vec<&Row> = rows
            .iter()
            .filter(|r| !has_alpha || r.series.as_deref() == Some("alpha"))
            .collect();
        let mut points = Vec::with_capacity(rows.len());
        for r in &rows {
            if !(r.x >= 0.0 && r.x.fract() == 0.0) {
                return Err(CliError::Config(format!(
                    "repeat count {} is not a non-negative integer",
                    r.x
                )));
            }
            points.push((r.x as usize, r.y));
        }
        let halfwidths: Option<Vec<f64>> = rows.iter().map(|r| r.y_err).collect();
        Ok(Self {
            label: label.to_string(),
            points,
            halfwidths,
        })
    }
}

pub fn cmd_classify(cfg: &ExperimentConfig, inputs: &[ClassifyInput]) -> Result<Outcome, CliError> {
    let start = Instant::now();
    if inputs.is_empty() {
        return Err(CliError::Config("classify needs at least one input".into()));
    }
    let cases = inputs
        .iter()
        .map(|i| {
            let report = classify_with(&i.points, i.halfwidths.as_deref(), &cfg.classify)?;
            Ok(ClassifiedCase {
                label: i.label.clone(),
                report,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let mut rows = Vec::new();
    for i in inputs {
        for (k, (n, a)) in i.points.iter().enumerate() {
            let err = i.halfwidths.as_ref().map(|h| h[k]);
            rows.push(PlotRow::new(i.label.clone(), *n as f64, *a, err));
        }
    }
    let table = ProbabilityTable::build(&cases);
    let inconclusive = cases.iter().any(|c| c.report.inconclusive);
    Ok(Outcome {
        report: Report::new(
            Command::Classify,
            0,
            cfg.clone(),
            start.elapsed().as_secs_f64(),
            Results::Classify { cases, table },
        ),
        rows,
        inconclusive,
    })
}

/// The three bundled IRB data sets: no injected error, pi/256 and pi/128.
pub fn bundled_inputs() -> Result<Vec<ClassifyInput>, CliError> {
    datasets::BUNDLED
        .iter()
        .map(|(label, text)| ClassifyInput::from_csv(label, text))
        .collect()
}

/// Angles of the bundled data sets, in the order of [`bundled_inputs`].
pub fn bundled_epsilons() -> [f64; 3] {
    datasets::EPSILONS
}

/// Config that regenerates the bundled data set for `epsilon`.
pub fn bundled_config(epsilon: f64) -> ExperimentConfig {
    datasets::bundled_config(epsilon)
}

/// The `alpha` rows of an IRB outcome, as stored in the bundled files.
pub fn alpha_csv(outcome: &Outcome) -> Result<String, CliError> {
    let rows: Vec<PlotRow> = outcome.rows.iter().filter(|r| r.series == "alpha").cloned().collect();
    crate::output::csv_string(&rows)
}
