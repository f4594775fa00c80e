//! Amplitude tuning against the simulated rotation angle.

use nalgebra::{Matrix3, Rotation3, Vector3};
use serde::{Deserialize, Serialize};

use std::f64::consts::{FRAC_PI_2, PI};

use super::{gaussian_drag_waveform, DeviceParams, GateSpec, NoiseConfig, Propagator, SimOptions};
use crate::calibration::{default_n_values, fit_amp_error, AmplificationData, CalibrationResult, SequenceKind};
use crate::clifford::GeneratorPulse;
use crate::error::{Error, Result};
use crate::qchannel::{Channel, QubitState};

/// Result of [`calibrate_amplitude`].
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AmplitudeCalibration {
    pub amplitude: f64,
    /// Fitted angle error of the final pulse, radians.
    pub residual: f64,
    pub iterations: usize,
}

/// Signed angle error of `ch` relative to a rotation by `angle` about the
/// in-plane axis at `phase`: the residual rotation after undoing the
/// target, projected on the drive axis.
pub fn rotation_error(ch: &Channel, angle: f64, phase: f64) -> f64 {
    let (m, _) = ch.bloch_map();
    let axis = Vector3::new(phase.cos(), phase.sin(), 0.0);
    let undo = Rotation3::from_axis_angle(&nalgebra::Unit::new_normalize(axis), -angle);
    let residual: Matrix3<f64> = undo.matrix() * m;
    // Antisymmetric part of a rotation matrix is sin(theta) [n]_x.
    let w = Vector3::new(
        residual[(2, 1)] - residual[(1, 2)],
        residual[(0, 2)] - residual[(2, 0)],
        residual[(1, 0)] - residual[(0, 1)],
    ) * 0.5;
    let cos = ((residual.trace() - 1.0) / 2.0).clamp(-1.0, 1.0);
    let sin_along = w.dot(&axis);
    sin_along.atan2(cos)
}

/// Tunes the amplitude of `template` so that the pulse rotates by
/// `target_angle` (pi/2 or pi), using the error-amplification sequence and
/// fit from [`crate::calibration`]: simulate, fit the angle error, scale the
/// amplitude by `angle / (angle + eps)`, repeat. Starts from the area
/// condition. The pi/2 preparation pulse in the pi sequence is ideal.
pub fn calibrate_amplitude(
    template: &GateSpec,
    device: &DeviceParams,
    target_angle: f64,
    opts: &SimOptions,
) -> Result<AmplitudeCalibration> {
    calibrate_amplitude_with(
        template,
        device,
        &NoiseConfig::noiseless(),
        target_angle,
        opts,
        1e-6,
        30,
    )
}

pub fn calibrate_amplitude_with(
    template: &GateSpec,
    device: &DeviceParams,
    noise: &NoiseConfig,
    target_angle: f64,
    opts: &SimOptions,
    tol: f64,
    max_iter: usize,
) -> Result<AmplitudeCalibration> {
    template.validate()?;
    let kind = if (target_angle.abs() - PI).abs() < 1e-9 {
        SequenceKind::Pi
    } else if (target_angle.abs() - FRAC_PI_2).abs() < 1e-9 {
        SequenceKind::HalfPi
    } else {
        return Err(Error::invalid("amplitude calibration supports angles of pi/2 and pi"));
    };
    let prop = Propagator::new(*device, *noise, *opts)?;
    let n_values = default_n_values();
    let prep = Channel::unitary(&GeneratorPulse::X90.ideal_unitary());
    let measure = |amp: f64| -> Result<CalibrationResult> {
        let spec = template.with_amplitude(amp).with_buffer(0.0);
        let pulse = prop.channel(&gaussian_drag_waveform(&spec, device.anharmonicity))?;
        let start = match kind {
            SequenceKind::Pi => prep,
            _ => pulse,
        };
        let p0 = n_values
            .iter()
            .map(|&n| {
                let ch = start.then(&pulse.power(2 * n as u32));
                ch.apply(&QubitState::ground()).ground_population()
            })
            .collect();
        fit_amp_error(&AmplificationData {
            n_values: n_values.clone(),
            p0,
            kind,
        })
    };
    let mut amp = template.area_amplitude(target_angle);
    let mut history = Vec::new();
    for it in 0..=max_iter {
        let fit = measure(amp)?;
        history.push(fit.epsilon);
        if fit.epsilon.abs() < tol {
            return Ok(AmplitudeCalibration {
                amplitude: amp,
                residual: fit.epsilon,
                iterations: it,
            });
        }
        if it < max_iter {
            amp *= target_angle / (target_angle + fit.epsilon * target_angle.signum());
        }
    }
    Err(Error::Calibration {
        message: format!(
            "amplitude search did not reach {tol:.1e} rad in {max_iter} iterations (last {:.3e})",
            history.last().copied().unwrap_or(f64::NAN)
        ),
        trace: Vec::new(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qchannel::Unitary2;

    #[test]
    fn rotation_error_reads_overrotation() {
        for (pulse, eps) in [
            (GeneratorPulse::X90, 0.01),
            (GeneratorPulse::Y180, -0.02),
            (GeneratorPulse::Xm90, 0.003),
        ] {
            let axis = [pulse.phase().cos(), pulse.phase().sin(), 0.0];
            let u = Unitary2::rotation(axis, pulse.angle() + eps).unwrap();
            let got = rotation_error(&Channel::unitary(&u), pulse.angle(), pulse.phase());
            assert!((got - eps).abs() < 1e-12, "{pulse}: {got}");
        }
    }

    #[test]
    fn two_level_limit_matches_area_condition() {
        let device = DeviceParams {
            anharmonicity: -100e9,
            ..DeviceParams::reference()
        };
        for (pulse, angle) in [(GeneratorPulse::X180, PI), (GeneratorPulse::X90, FRAC_PI_2)] {
            let spec = GateSpec::new(pulse, 16.7e-9);
            let cal = calibrate_amplitude(&spec, &device, angle, &SimOptions::default()).unwrap();
            assert!((cal.amplitude / spec.amplitude - 1.0).abs() < 1e-3);
        }
    }

    #[test]
    fn calibrated_pi_pulse_empties_ground_state() {
        let device = DeviceParams::reference();
        let spec = GateSpec::new(GeneratorPulse::X180, 10e-9).with_drag(0.5);
        let cal = calibrate_amplitude(&spec, &device, PI, &SimOptions::default()).unwrap();
        assert!(cal.residual.abs() < 1e-4);
        let w = gaussian_drag_waveform(&spec.with_amplitude(cal.amplitude), device.anharmonicity);
        let ch = Propagator::new(device, NoiseConfig::noiseless(), SimOptions::default())
            .unwrap()
            .channel(&w)
            .unwrap();
        assert!(ch.apply(&QubitState::ground()).ground_population() < 1e-4);
        assert!(rotation_error(&ch, PI, 0.0).abs() < 1e-3);
    }
}
