//! Pulse-level simulation of a driven three-level transmon.
//!
//! The drive is treated in the frame rotating at the qubit frequency with
//! the rotating-wave approximation:
//!
//! ```text
//! H(t) = delta |2><2| + Omega_I(t)/2 (b + b^dag) + Omega_Q(t)/2 (i b^dag - i b)
//! ```
//!
//! with `b = |0><1| + sqrt(2) |1><2|` and `delta = 2 pi * anharmonicity`.
//! Relaxation uses the collapse operator `b / sqrt(T1)`, pure dephasing the
//! operator `sqrt(2 gamma) n` with `gamma = 1/T2 - 1/(2 T1) + k |Omega(t)|`.

mod amplitude;
mod gateset;
mod master;
pub mod ode;
mod waveform;

use serde::{Deserialize, Serialize};

use crate::clifford::GeneratorPulse;
use crate::error::{Error, Result};

pub use amplitude::{calibrate_amplitude, calibrate_amplitude_with, rotation_error, AmplitudeCalibration};
pub use gateset::GateSet;
pub use master::{propagate, propagate_with, BlockOutput, Propagator};
pub use waveform::{
    drive_line_filter, gaussian_drag_waveform, lifted_gaussian_area, PlacedPulse, Waveform, DEFAULT_SAMPLE_DT,
};

/// Transmon parameters. Frequencies in Hz, times in seconds.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct DeviceParams {
    pub qubit_freq: f64,
    /// `f_12 - f_01`; negative for a transmon.
    pub anharmonicity: f64,
    pub t1: f64,
    pub t2: f64,
}

impl DeviceParams {
    /// 5.0154 GHz qubit, -323 MHz anharmonicity, T1 = 45 us, T2 = 53 us.
    pub fn reference() -> Self {
        Self {
            qubit_freq: 5.0154e9,
            anharmonicity: -323e6,
            t1: 45e-6,
            t2: 53e-6,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.t1 > 0.0 && self.t2 > 0.0) {
            return Err(Error::invalid("T1 and T2 must be positive"));
        }
        if self.t2 > 2.0 * self.t1 * (1.0 + 1e-12) {
            return Err(Error::invalid("T2 must not exceed 2 T1"));
        }
        if self.anharmonicity == 0.0 || !self.anharmonicity.is_finite() {
            return Err(Error::invalid("anharmonicity must be finite and non-zero"));
        }
        Ok(())
    }

    pub(crate) fn anharmonicity_angular(&self) -> f64 {
        std::f64::consts::TAU * self.anharmonicity
    }
}

impl Default for DeviceParams {
    fn default() -> Self {
        Self::reference()
    }
}

/// Shape and timing of one physical pulse.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct GateSpec {
    pub target: GeneratorPulse,
    /// Pulse length in seconds; the Gaussian width is a quarter of it.
    pub gate_length: f64,
    /// Signed peak in-phase Rabi rate in rad/s.
    pub amplitude: f64,
    /// DRAG coefficient (dimensionless).
    pub drag_lambda: f64,
    /// Drive phase in radians (0 for X, pi/2 for Y).
    pub phase: f64,
    /// Idle time after the pulse.
    pub buffer: f64,
}

impl GateSpec {
    /// Pulse for `target` with the amplitude set by the area condition,
    /// no DRAG and no buffer.
    pub fn new(target: GeneratorPulse, gate_length: f64) -> Self {
        let mut spec = Self {
            target,
            gate_length,
            amplitude: 0.0,
            drag_lambda: 0.0,
            phase: target.phase(),
            buffer: 0.0,
        };
        spec.amplitude = spec.area_amplitude(target.angle());
        spec
    }

    pub fn sigma(&self) -> f64 {
        self.gate_length / 4.0
    }

    /// Peak amplitude whose envelope integral equals `angle`.
    pub fn area_amplitude(&self, angle: f64) -> f64 {
        angle / lifted_gaussian_area(self.gate_length, self.sigma())
    }

    /// Rotation angle implied by the envelope area.
    pub fn area_angle(&self) -> f64 {
        self.amplitude * lifted_gaussian_area(self.gate_length, self.sigma())
    }

    pub fn with_drag(mut self, lambda: f64) -> Self {
        self.drag_lambda = lambda;
        self
    }

    pub fn with_buffer(mut self, buffer: f64) -> Self {
        self.buffer = buffer;
        self
    }

    pub fn with_amplitude(mut self, amplitude: f64) -> Self {
        self.amplitude = amplitude;
        self
    }

    /// Total time slot: pulse plus buffer.
    pub fn duration(&self) -> f64 {
        self.gate_length + self.buffer
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.gate_length > 0.0) {
            return Err(Error::invalid("gate length must be positive"));
        }
        if !(self.buffer >= 0.0) {
            return Err(Error::invalid("buffer must be non-negative"));
        }
        if !self.amplitude.is_finite() || !self.drag_lambda.is_finite() {
            return Err(Error::invalid("amplitude and DRAG coefficient must be finite"));
        }
        Ok(())
    }
}

/// Which pulses an injected overrotation applies to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum InjectionScope {
    /// Only pulses applied directly (interleaved targets, calibration
    /// sequences); random Cliffords are built from unaltered pulses.
    #[default]
    DirectPulses,
    /// Every occurrence of the pulse kind, including inside Cliffords.
    Everywhere,
}

/// Error sources injected on top of the calibrated device.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    /// Apply T1/T2 relaxation during every pulse and idle.
    pub use_decoherence: bool,
    /// Drive-activated dephasing `gamma_phi = k |Omega(t)|`.
    pub drive_dephasing_k: f64,
    /// Extra rotation angle in radians added to `overrotation_pulse`.
    pub overrotation_epsilon: f64,
    pub overrotation_pulse: GeneratorPulse,
    pub overrotation_scope: InjectionScope,
    /// Radians added to the drive phase of every Y pulse.
    pub axis_skew: f64,
    /// Drive-line low-pass time constant in seconds; 0 disables.
    pub drive_filter_tau: f64,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            use_decoherence: false,
            drive_dephasing_k: 0.0,
            overrotation_epsilon: 0.0,
            overrotation_pulse: GeneratorPulse::X90,
            overrotation_scope: InjectionScope::DirectPulses,
            axis_skew: 0.0,
            drive_filter_tau: 0.0,
        }
    }
}

impl NoiseConfig {
    pub fn noiseless() -> Self {
        Self::default()
    }

    pub fn decoherence_only() -> Self {
        Self {
            use_decoherence: true,
            ..Self::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.drive_dephasing_k >= 0.0) {
            return Err(Error::invalid("drive dephasing k must be non-negative"));
        }
        if !(self.drive_filter_tau >= 0.0) {
            return Err(Error::invalid("drive filter tau must be non-negative"));
        }
        if !self.overrotation_epsilon.is_finite() || !self.axis_skew.is_finite() {
            return Err(Error::invalid("injected errors must be finite"));
        }
        Ok(())
    }

    /// Injected overrotation for `pulse`, given whether it was applied
    /// directly or as part of a Clifford.
    pub fn overrotation_for(&self, pulse: GeneratorPulse, direct: bool) -> f64 {
        let applies = match self.overrotation_scope {
            InjectionScope::DirectPulses => direct,
            InjectionScope::Everywhere => true,
        };
        if applies && pulse == self.overrotation_pulse {
            self.overrotation_epsilon
        } else {
            0.0
        }
    }
}

/// Number of transmon levels kept in the simulation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum Levels {
    /// Qubit only: the 1-2 coupling is dropped.
    Two,
    #[default]
    Three,
}

/// How population left in |2> at the end of a simulation is mapped back
/// onto the qubit so the result is a trace-preserving qubit channel.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum LeakageModel {
    /// Leaked population is added to |1><1| without coherence.
    #[default]
    ToExcited,
    /// Leaked population is spread evenly over |0> and |1>.
    ToMixed,
}

/// Integrator and model settings.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct SimOptions {
    pub levels: Levels,
    pub leakage: LeakageModel,
    pub rtol: f64,
    pub atol: f64,
    /// Upper bound on the integrator step in seconds.
    pub max_step: f64,
    pub max_steps: usize,
}

impl Default for SimOptions {
    fn default() -> Self {
        Self {
            levels: Levels::Three,
            leakage: LeakageModel::ToExcited,
            rtol: 1e-10,
            atol: 1e-12,
            max_step: 0.1e-9,
            max_steps: 5_000_000,
        }
    }
}

impl SimOptions {
    pub fn two_level() -> Self {
        Self {
            levels: Levels::Two,
            ..Self::default()
        }
    }
}
