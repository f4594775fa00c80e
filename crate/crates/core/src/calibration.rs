//! Error-amplification sequences and their fits.
//!
//! The amplitude sequences are `X90 - P^{2n}` with `P` either the pi/2 or
//! the pi pulse; the ground population is fitted with
//!
//! ```text
//! X90 sequence:  P0 = a + 1/2 (-1)^n cos(pi/2 + 2 n eps)
//! X180 sequence: P0 = a + 1/2 cos(pi/2 + 2 n eps)
//! ```
//!
//! and converted to a gate error `eps^2 / 6`. A positive `eps` means the
//! pulse rotates too far. For the X90 sequence the accumulated error is
//! really `(2n + 1) eps`, so the fitted value overestimates the true angle
//! error by roughly `1/(2 n_max)`; the closed-loop calibrator only relies on
//! its sign and rough size.
//!
//! The axis sequence `X90 - (X180 - Y180)^n - (-Y90)` is fitted with the X90
//! form and converted with `2 eps^2 / 3`.

use std::f64::consts::{FRAC_PI_2, FRAC_PI_4, PI};

use nalgebra::{DMatrix, DVector};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::clifford::GeneratorPulse;
use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, ols, t95, LmOptions};
use crate::protocols::{Backend, Gate, PulseBackend};
use crate::transmon::{DeviceParams, GateSet, NoiseConfig, SimOptions};

/// Which amplification sequence produced a data set.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum SequenceKind {
    /// `X90 - X90^{2n}`.
    HalfPi,
    /// `X90 - X180^{2n}`.
    Pi,
    /// `X90 - (X180 - Y180)^n - (-Y90)`.
    Axis,
}

impl SequenceKind {
    /// Whether the fit function alternates sign with `n`.
    fn alternates(self) -> bool {
        !matches!(self, SequenceKind::Pi)
    }

    /// Gate error implied by a fitted angle.
    pub fn implied_error(self, epsilon: f64) -> f64 {
        match self {
            SequenceKind::HalfPi | SequenceKind::Pi => epsilon * epsilon / 6.0,
            SequenceKind::Axis => 2.0 * epsilon * epsilon / 3.0,
        }
    }

    pub fn sequence(self, n: usize) -> Vec<Gate> {
        match self {
            SequenceKind::HalfPi => amp_cal_sequence(GeneratorPulse::X90, n),
            SequenceKind::Pi => amp_cal_sequence(GeneratorPulse::X180, n),
            SequenceKind::Axis => axis_sequence(n),
        }
    }

    /// Noise-free value of the fit function.
    pub fn model(self, a: f64, epsilon: f64, n: usize) -> f64 {
        let sign = if self.alternates() && n % 2 == 1 { -1.0 } else { 1.0 };
        a + 0.5 * sign * (FRAC_PI_2 + 2.0 * n as f64 * epsilon).cos()
    }
}

/// `X90` followed by `2n` copies of `pulse` (X90 or X180).
pub fn amp_cal_sequence(pulse: GeneratorPulse, n: usize) -> Vec<Gate> {
    let mut gates = vec![Gate::Pulse(GeneratorPulse::X90)];
    gates.extend(std::iter::repeat_n(Gate::Pulse(pulse), 2 * n));
    gates
}

/// `X90 - (X180 - Y180)^n - (-Y90)`.
pub fn axis_sequence(n: usize) -> Vec<Gate> {
    let mut gates = vec![Gate::Pulse(GeneratorPulse::X90)];
    for _ in 0..n {
        gates.push(Gate::Pulse(GeneratorPulse::X180));
        gates.push(Gate::Pulse(GeneratorPulse::Y180));
    }
    gates.push(Gate::Pulse(GeneratorPulse::Ym90));
    gates
}

/// Default repetition grid `n = 0..=12`.
pub fn default_n_values() -> Vec<usize> {
    (0..=12).collect()
}

/// Ground populations of one amplification sequence family.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AmplificationData {
    pub n_values: Vec<usize>,
    pub p0: Vec<f64>,
    pub kind: SequenceKind,
}

impl AmplificationData {
    /// Runs the sequence for every `n` on `backend`.
    pub fn measure<B: Backend + ?Sized>(kind: SequenceKind, n_values: &[usize], backend: &B) -> Result<Self> {
        let p0 = n_values
            .par_iter()
            .map(|n| Ok(backend.survival(&kind.sequence(*n))?.clamp(0.0, 1.0)))
            .collect::<Result<Vec<f64>>>()?;
        Ok(Self {
            n_values: n_values.to_vec(),
            p0,
            kind,
        })
    }
}

/// Fitted angle error from an amplification sequence.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationResult {
    pub kind: SequenceKind,
    pub epsilon: f64,
    /// Student-t 95% interval for epsilon.
    pub epsilon_ci: [f64; 2],
    pub offset_a: f64,
    pub implied_gate_error: f64,
    pub rss: f64,
    /// Data were constant: epsilon is reported as 0 with a wide interval.
    pub degenerate: bool,
}

/// Least-squares fit of `(a, eps)` with the sequence's fit function.
pub fn fit_amp_error(data: &AmplificationData) -> Result<CalibrationResult> {
    if data.n_values.len() != data.p0.len() {
        return Err(Error::invalid("n_values and p0 differ in length"));
    }
    let mut distinct = data.n_values.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 4 {
        return Err(Error::invalid("amplification fit needs at least 4 distinct n"));
    }
    if data.p0.iter().any(|p| !(0.0..=1.0).contains(p)) {
        return Err(Error::invalid("populations must lie in [0, 1]"));
    }
    let kind = data.kind;
    let n_max = *distinct.last().unwrap() as f64;
    let spread = data.p0.iter().copied().fold(f64::NEG_INFINITY, f64::max)
        - data.p0.iter().copied().fold(f64::INFINITY, f64::min);
    let mean = data.p0.iter().sum::<f64>() / data.p0.len() as f64;
    if spread < 1e-9 {
        let half = PI / (4.0 * n_max.max(1.0));
        return Ok(CalibrationResult {
            kind,
            epsilon: 0.0,
            epsilon_ci: [-half, half],
            offset_a: mean,
            implied_gate_error: 0.0,
            rss: 0.0,
            degenerate: true,
        });
    }

    // Shifting eps by pi/2 turns the alternating form into the plain one, so
    // angles are only identifiable within |eps| < pi/4. Scan that window
    // with `a` solved exactly, then polish both parameters.
    let rss_at = |eps: f64| -> (f64, f64) {
        let shape: Vec<f64> = data.n_values.iter().map(|&n| kind.model(0.0, eps, n)).collect();
        let a = data.p0.iter().zip(&shape).map(|(p, s)| p - s).sum::<f64>() / shape.len() as f64;
        let rss = data.p0.iter().zip(&shape).map(|(p, s)| (p - a - s).powi(2)).sum();
        (rss, a)
    };
    let steps = (400.0 * n_max.max(1.0)) as usize;
    let (mut best_eps, mut best) = (0.0, f64::INFINITY);
    for i in 0..steps {
        let eps = FRAC_PI_2 * ((i as f64 + 0.5) / steps as f64 - 0.5);
        let (r, _) = rss_at(eps);
        if r < best {
            best = r;
            best_eps = eps;
        }
    }
    let a0 = rss_at(best_eps).1;
    let xs: Vec<f64> = data.n_values.iter().map(|n| *n as f64).collect();
    let model = |p: &[f64], x: f64| {
        let n = x as usize;
        let sign = if kind.alternates() && n % 2 == 1 { -1.0 } else { 1.0 };
        let arg = FRAC_PI_2 + 2.0 * x * p[1];
        (p[0] + 0.5 * sign * arg.cos(), vec![1.0, -sign * x * arg.sin()])
    };
    let mut opts = LmOptions::unbounded(2);
    opts.bounds[1] = (-FRAC_PI_4, FRAC_PI_4);
    let fit = levenberg_marquardt(model, &xs, &data.p0, &[a0, best_eps], &opts)?;
    let eps = fit.params[1];
    let half = t95(xs.len().saturating_sub(2)) * fit.stderr(1);
    Ok(CalibrationResult {
        kind,
        epsilon: eps,
        epsilon_ci: [eps - half, eps + half],
        offset_a: fit.params[0],
        implied_gate_error: kind.implied_error(eps),
        rss: fit.rss,
        degenerate: false,
    })
}

/// `(X90 - (-X90))` repeated `repetitions` times.
pub fn drag_cal_sequence(repetitions: usize) -> Vec<Gate> {
    (0..repetitions.max(1))
        .flat_map(|_| [Gate::Pulse(GeneratorPulse::X90), Gate::Pulse(GeneratorPulse::Xm90)])
        .collect()
}

/// Default DRAG grid: 0 to 2 in 21 points.
pub fn default_lambda_grid() -> Vec<f64> {
    (0..21).map(|i| i as f64 * 0.1).collect()
}

/// Ground population against DRAG coefficient, with a cosine fit.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DragSweep {
    pub lambdas: Vec<f64>,
    pub p0: Vec<f64>,
    /// Maximum of the fitted cosine; the best grid point when flat.
    pub best_lambda: f64,
    /// Population does not depend on the coefficient (spread below 1e-6).
    pub flat: bool,
    /// `c0 + c1 cos(w x) + c2 sin(w x)` as `[c0, c1, c2, w]`.
    pub fit: [f64; 4],
}

/// Fits a cosine to `p0(lambda)` and returns the coefficient that maximizes
/// the return to |0>.
pub fn fit_drag_sweep(lambdas: &[f64], p0: &[f64]) -> Result<DragSweep> {
    if lambdas.len() < 5 || lambdas.len() != p0.len() {
        return Err(Error::invalid("DRAG sweep needs at least 5 matching points"));
    }
    if lambdas.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::invalid("DRAG grid must be strictly ascending"));
    }
    let (lo, hi) = (lambdas[0], lambdas[lambdas.len() - 1]);
    let argmax = p0
        .iter()
        .enumerate()
        .max_by(|a, b| a.1.total_cmp(b.1))
        .map(|(i, _)| i)
        .unwrap();
    let spread =
        p0.iter().copied().fold(f64::NEG_INFINITY, f64::max) - p0.iter().copied().fold(f64::INFINITY, f64::min);
    if spread < 1e-6 {
        return Ok(DragSweep {
            lambdas: lambdas.to_vec(),
            p0: p0.to_vec(),
            best_lambda: lambdas[argmax],
            flat: true,
            fit: [p0[argmax], 0.0, 0.0, 0.0],
        });
    }
    let span = hi - lo;
    let min_step = lambdas.windows(2).map(|w| w[1] - w[0]).fold(f64::INFINITY, f64::min);
    let w_lo = PI / (4.0 * span);
    let w_hi = PI / min_step;
    let y = DVector::from_column_slice(p0);
    let solve = |w: f64| -> Option<([f64; 3], f64)> {
        let x = DMatrix::from_fn(lambdas.len(), 3, |i, j| match j {
            0 => 1.0,
            1 => (w * lambdas[i]).cos(),
            _ => (w * lambdas[i]).sin(),
        });
        ols(&x, &y, None).ok().map(|(b, r)| ([b[0], b[1], b[2]], r))
    };
    let mut best: Option<([f64; 3], f64, f64)> = None;
    let scan = 2000;
    for i in 0..=scan {
        let w = w_lo * (w_hi / w_lo).powf(i as f64 / scan as f64);
        if let Some((c, r)) = solve(w) {
            if best.as_ref().is_none_or(|b| r < b.1) {
                best = Some((c, r, w));
            }
        }
    }
    let (c, _, w) = best.ok_or_else(|| Error::fit("cosine fit failed at every frequency"))?;
    let model = |p: &[f64], x: f64| {
        let (s, co) = (p[3] * x).sin_cos();
        (
            p[0] + p[1] * co + p[2] * s,
            vec![1.0, co, s, x * (-p[1] * s + p[2] * co)],
        )
    };
    let fit = levenberg_marquardt(model, lambdas, p0, &[c[0], c[1], c[2], w], &LmOptions::unbounded(4))?;
    let [c0, c1, c2, w] = [fit.params[0], fit.params[1], fit.params[2], fit.params[3]];
    // Maxima of c1 cos(wx) + c2 sin(wx) sit at w x = atan2(c2, c1) + 2 pi k.
    let phase = c2.atan2(c1);
    let period = 2.0 * PI / w.abs();
    let first = phase / w;
    let centre = lambdas[argmax];
    let k = ((centre - first) / period).round();
    let vertex = first + k * period;
    let tol = 1e-9 * span.max(1.0);
    if !(vertex > lo + tol && vertex < hi - tol) {
        return Err(Error::Range(format!(
            "DRAG optimum {vertex:.4} is not inside the grid [{lo}, {hi}]; widen the grid"
        )));
    }
    Ok(DragSweep {
        lambdas: lambdas.to_vec(),
        p0: p0.to_vec(),
        best_lambda: vertex,
        flat: false,
        fit: [c0, c1, c2, w],
    })
}

/// Measures the DRAG sequence with `measure(lambda)` over the grid and fits.
pub fn drag_cal_sweep_with<F>(lambda_grid: &[f64], measure: F) -> Result<DragSweep>
where
    F: Fn(f64) -> Result<f64> + Sync,
{
    let p0 = lambda_grid
        .par_iter()
        .map(|l| measure(*l))
        .collect::<Result<Vec<f64>>>()?;
    fit_drag_sweep(lambda_grid, &p0)
}

/// DRAG sweep on a pulse backend, varying the coefficient of every pulse.
pub fn drag_cal_sweep(lambda_grid: &[f64], backend: &PulseBackend, repetitions: usize) -> Result<DragSweep> {
    let seq = drag_cal_sequence(repetitions);
    drag_cal_sweep_with(lambda_grid, |l| backend.with_drag(l)?.survival(&seq))
}

/// Axis-error amplification for each buffer; `make(buffer)` builds the
/// backend with that inter-pulse buffer.
pub fn axis_error_experiment<B, F>(
    n_values: &[usize],
    buffer_grid: &[f64],
    make: F,
) -> Result<Vec<(f64, CalibrationResult)>>
where
    B: Backend,
    F: Fn(f64) -> Result<B> + Sync,
{
    buffer_grid
        .par_iter()
        .map(|&buffer| {
            let backend = make(buffer)?;
            let data = AmplificationData::measure(SequenceKind::Axis, n_values, &backend)?;
            Ok((buffer, fit_amp_error(&data)?))
        })
        .collect()
}

/// Settings for [`calibrate_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct CalibrationSchedule {
    pub gate_length: f64,
    pub buffer: f64,
    /// Multiplies the area-condition amplitudes before the first round.
    pub initial_amplitude_scale: f64,
    pub initial_drag_lambda: f64,
    pub n_values: Vec<usize>,
    pub lambda_grid: Vec<f64>,
    /// Repetitions of the DRAG pair per measurement.
    pub drag_repetitions: usize,
    /// Skip the DRAG step.
    pub calibrate_drag: bool,
    /// Convergence threshold on both fitted angles, radians.
    pub threshold: f64,
    pub max_rounds: usize,
    pub sim: SimOptions,
}

impl Default for CalibrationSchedule {
    fn default() -> Self {
        Self {
            gate_length: 16.7e-9,
            buffer: 0.0,
            initial_amplitude_scale: 1.0,
            initial_drag_lambda: 0.0,
            n_values: default_n_values(),
            lambda_grid: default_lambda_grid(),
            drag_repetitions: 10,
            calibrate_drag: true,
            threshold: 5e-4,
            max_rounds: 10,
            sim: SimOptions::default(),
        }
    }
}

/// State after one calibration round.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RoundRecord {
    pub round: usize,
    /// Angles fitted at the start of the round.
    pub epsilon_pi: f64,
    pub epsilon_half_pi: f64,
    pub amplitude_pi: f64,
    pub amplitude_half_pi: f64,
    pub drag_lambda: f64,
    /// Angles fitted with the round's final pulses.
    pub check_epsilon_pi: f64,
    pub check_epsilon_half_pi: f64,
    pub drag_flat: bool,
}

/// Output of [`calibrate_all`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibratedGates {
    pub gates: GateSet,
    pub rounds: Vec<RoundRecord>,
    pub final_pi: CalibrationResult,
    pub final_half_pi: CalibrationResult,
    pub last_drag: Option<DragSweep>,
}

fn amplitude_update(amplitude: f64, angle: f64, epsilon: f64) -> f64 {
    amplitude * angle / (angle + epsilon)
}

/// Closed-loop calibration of the X pi and X pi/2 amplitudes and the DRAG
/// coefficient on the pulse simulator. Each round applies one
/// fit-and-update step to both amplitudes, then one DRAG sweep, then
/// re-measures both angles; it stops once both are below the threshold.
/// Y pulses share the X amplitudes.
pub fn calibrate_all(
    device: &DeviceParams,
    noise: &NoiseConfig,
    schedule: &CalibrationSchedule,
) -> Result<CalibratedGates> {
    if schedule.max_rounds == 0 {
        return Err(Error::invalid("max_rounds must be at least 1"));
    }
    let mut gates = GateSet::new(schedule.gate_length, schedule.buffer)
        .with_drag(schedule.initial_drag_lambda)
        .scaled(schedule.initial_amplitude_scale);
    let backend = PulseBackend::new(*device, *noise, gates, schedule.sim)?;
    let measure = |b: &PulseBackend| -> Result<(CalibrationResult, CalibrationResult)> {
        let pi = fit_amp_error(&AmplificationData::measure(SequenceKind::Pi, &schedule.n_values, b)?)?;
        let half = fit_amp_error(&AmplificationData::measure(
            SequenceKind::HalfPi,
            &schedule.n_values,
            b,
        )?)?;
        Ok((pi, half))
    };
    let mut current = backend;
    let (mut pi, mut half) = measure(&current)?;
    let mut rounds = Vec::new();
    let mut last_drag = None;
    for round in 1..=schedule.max_rounds {
        let (eps_pi, eps_half) = (pi.epsilon, half.epsilon);
        gates.x180.amplitude = amplitude_update(gates.x180.amplitude, PI, eps_pi);
        gates.x90.amplitude = amplitude_update(gates.x90.amplitude, FRAC_PI_2, eps_half);
        let mut flat = false;
        if schedule.calibrate_drag {
            let probe = current.with_gates(gates)?;
            match drag_cal_sweep(&schedule.lambda_grid, &probe, schedule.drag_repetitions) {
                Ok(sweep) => {
                    flat = sweep.flat;
                    if !sweep.flat {
                        gates = gates.with_drag(sweep.best_lambda);
                    }
                    last_drag = Some(sweep);
                }
                Err(e) => {
                    return Err(Error::Calibration {
                        message: format!("DRAG step failed in round {round}: {e}"),
                        trace: rounds,
                    })
                }
            }
        }
        current = current.with_gates(gates)?;
        (pi, half) = measure(&current)?;
        rounds.push(RoundRecord {
            round,
            epsilon_pi: eps_pi,
            epsilon_half_pi: eps_half,
            amplitude_pi: gates.x180.amplitude,
            amplitude_half_pi: gates.x90.amplitude,
            drag_lambda: gates.x90.drag_lambda,
            check_epsilon_pi: pi.epsilon,
            check_epsilon_half_pi: half.epsilon,
            drag_flat: flat,
        });
        if pi.epsilon.abs() < schedule.threshold && half.epsilon.abs() < schedule.threshold {
            return Ok(CalibratedGates {
                gates,
                rounds,
                final_pi: pi,
                final_half_pi: half,
                last_drag,
            });
        }
    }
    Err(Error::Calibration {
        message: format!(
            "angles still {:.3e} (pi) and {:.3e} (pi/2) rad after {} rounds",
            pi.epsilon, half.epsilon, schedule.max_rounds
        ),
        trace: rounds,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::ExactBackend;

    #[test]
    fn sequences() {
        assert_eq!(
            amp_cal_sequence(GeneratorPulse::X180, 0),
            vec![Gate::Pulse(GeneratorPulse::X90)]
        );
        assert_eq!(
            amp_cal_sequence(GeneratorPulse::X90, 1),
            vec![Gate::Pulse(GeneratorPulse::X90); 3]
        );
        assert_eq!(axis_sequence(1).len(), 4);
    }

    #[test]
    fn ideal_sequences_sit_at_one_half() {
        let b = ExactBackend::ideal();
        for kind in [SequenceKind::HalfPi, SequenceKind::Pi, SequenceKind::Axis] {
            for n in 0..6 {
                assert!((b.survival(&kind.sequence(n)).unwrap() - 0.5).abs() < 1e-14);
            }
        }
    }

    #[test]
    fn synthetic_round_trip() {
        for kind in [SequenceKind::HalfPi, SequenceKind::Pi, SequenceKind::Axis] {
            for eps in [0.01, -0.004, 0.03] {
                let n_values = default_n_values();
                let p0 = n_values.iter().map(|n| kind.model(0.5, eps, *n)).collect();
                let fit = fit_amp_error(&AmplificationData { n_values, p0, kind }).unwrap();
                assert!((fit.epsilon - eps).abs() < 1e-6, "{kind:?} {eps}: {}", fit.epsilon);
                assert!((fit.offset_a - 0.5).abs() < 1e-6);
                assert_eq!(fit.implied_gate_error, kind.implied_error(fit.epsilon));
            }
        }
    }

    #[test]
    fn degenerate_data_is_flagged() {
        let n_values = default_n_values();
        let p0 = vec![0.5; n_values.len()];
        let fit = fit_amp_error(&AmplificationData {
            n_values,
            p0,
            kind: SequenceKind::HalfPi,
        })
        .unwrap();
        assert!(fit.degenerate && fit.epsilon == 0.0 && fit.epsilon_ci[1] > 0.0);
    }

    #[test]
    fn too_few_n_is_rejected() {
        let data = AmplificationData {
            n_values: vec![0, 1, 2],
            p0: vec![0.5; 3],
            kind: SequenceKind::Pi,
        };
        assert!(fit_amp_error(&data).is_err());
    }

    #[test]
    fn cosine_vertex() {
        let grid: Vec<f64> = (0..21).map(|i| i as f64 * 0.1).collect();
        let p0: Vec<f64> = grid.iter().map(|l| 0.7 + 0.2 * (1.3 * (l - 0.83)).cos()).collect();
        let sweep = fit_drag_sweep(&grid, &p0).unwrap();
        assert!((sweep.best_lambda - 0.83).abs() < 1e-6);
        let edge: Vec<f64> = grid.iter().map(|l| 0.7 + 0.2 * (0.5 * (l - 3.0)).cos()).collect();
        assert!(matches!(fit_drag_sweep(&grid, &edge), Err(Error::Range(_))));
    }
}
