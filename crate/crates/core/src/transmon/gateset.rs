use serde::{Deserialize, Serialize};

use super::{gaussian_drag_waveform, GateSpec, NoiseConfig, Waveform};
use crate::clifford::{GeneratorPulse, PulseAxis};
use crate::error::{Error, Result};

/// Pulse shapes for every generator. Only the X pi and X pi/2 pulses are
/// independent; the others are derived from them.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields)]
pub struct GateSet {
    pub x180: GateSpec,
    pub x90: GateSpec,
}

impl GateSet {
    /// Area-condition amplitudes, no DRAG.
    pub fn new(gate_length: f64, buffer: f64) -> Self {
        Self {
            x180: GateSpec::new(GeneratorPulse::X180, gate_length).with_buffer(buffer),
            x90: GateSpec::new(GeneratorPulse::X90, gate_length).with_buffer(buffer),
        }
    }

    pub fn with_drag(mut self, lambda: f64) -> Self {
        self.x180.drag_lambda = lambda;
        self.x90.drag_lambda = lambda;
        self
    }

    pub fn with_buffer(mut self, buffer: f64) -> Self {
        self.x180.buffer = buffer;
        self.x90.buffer = buffer;
        self
    }

    /// Scales both amplitudes, e.g. to start a calibration off target.
    pub fn scaled(mut self, factor: f64) -> Self {
        self.x180.amplitude *= factor;
        self.x90.amplitude *= factor;
        self
    }

    pub fn validate(&self) -> Result<()> {
        self.x180.validate()?;
        self.x90.validate()?;
        if (self.x180.duration() - self.x90.duration()).abs() > 1e-15 {
            return Err(Error::invalid("X pi and X pi/2 pulses must occupy the same time slot"));
        }
        Ok(())
    }

    /// Time slot of every pulse, including the buffer.
    pub fn slot(&self) -> f64 {
        self.x90.duration()
    }

    pub fn gate_length(&self) -> f64 {
        self.x90.gate_length
    }

    /// Shape for `pulse`: Y pulses reuse X amplitudes with the phase shifted
    /// by pi/2; negative rotations flip the amplitude sign.
    pub fn spec(&self, pulse: GeneratorPulse) -> GateSpec {
        use GeneratorPulse::*;
        let base = match pulse {
            X180 | Y180 => self.x180,
            _ => self.x90,
        };
        let mut spec = GateSpec {
            target: pulse,
            phase: pulse.phase(),
            ..base
        };
        match pulse {
            I => spec.amplitude = 0.0,
            Xm90 | Ym90 => spec.amplitude = -spec.amplitude,
            _ => {}
        }
        spec
    }

    /// Shape actually played for `pulse` once injected errors are applied.
    pub fn played(&self, pulse: GeneratorPulse, noise: &NoiseConfig, direct: bool) -> GateSpec {
        let mut spec = self.spec(pulse);
        let eps = noise.overrotation_for(pulse, direct);
        if eps != 0.0 && pulse.angle() != 0.0 {
            let angle = pulse.angle();
            spec.amplitude *= (angle + eps * angle.signum()) / angle;
        }
        if pulse.axis() == PulseAxis::Y {
            spec.phase += noise.axis_skew;
        }
        spec
    }

    pub fn waveform(&self, pulse: GeneratorPulse, noise: &NoiseConfig, direct: bool, anharmonicity: f64) -> Waveform {
        gaussian_drag_waveform(&self.played(pulse, noise, direct), anharmonicity)
    }
}
