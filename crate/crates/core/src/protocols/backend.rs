use std::sync::Arc;

use nalgebra::Vector4;
use rayon::prelude::*;

use super::Gate;
use crate::clifford::{enumerate, CliffordElement, GeneratorPulse, PulseAxis};
use crate::error::{Error, Result};
use crate::qchannel::{Channel, Unitary2, C64};
use crate::transmon::{DeviceParams, GateSet, NoiseConfig, Propagator, SimOptions, Waveform};

/// Supplies the physical channel of every gate.
pub trait Backend: Sync {
    fn channel(&self, gate: &Gate) -> Result<Channel>;

    /// Probability of |0> after applying `gates` to |0>.
    fn survival(&self, gates: &[Gate]) -> Result<f64> {
        let mut v = Vector4::new(C64::from(1.0), C64::from(0.0), C64::from(0.0), C64::from(0.0));
        for g in gates {
            v = self.channel(g)?.superop() * v;
        }
        Ok(v[0].re)
    }
}

impl<B: Backend + ?Sized> Backend for &B {
    fn channel(&self, gate: &Gate) -> Result<Channel> {
        (**self).channel(gate)
    }

    fn survival(&self, gates: &[Gate]) -> Result<f64> {
        (**self).survival(gates)
    }
}

/// Precomputed channels for the 7 directly played pulses and the 24
/// Cliffords.
#[derive(Debug, Clone)]
struct ChannelTable {
    pulses: [Channel; 7],
    cliffords: Vec<Channel>,
}

impl ChannelTable {
    fn build(direct: impl Fn(GeneratorPulse) -> Channel, in_clifford: impl Fn(GeneratorPulse) -> Channel) -> Self {
        let pulses = GeneratorPulse::ALL.map(&direct);
        let inner = GeneratorPulse::ALL.map(&in_clifford);
        let cliffords = enumerate()
            .into_iter()
            .map(|c| {
                c.decompose()
                    .iter()
                    .fold(Channel::identity(), |acc, p| acc.then(&inner[p.index()]))
            })
            .collect();
        Self { pulses, cliffords }
    }

    fn get(&self, gate: &Gate) -> Channel {
        match gate {
            Gate::Clifford(c) => self.cliffords[c.index()],
            Gate::Pulse(p) => self.pulses[p.index()],
        }
    }
}

/// Backend built from closed-form channels.
#[derive(Debug, Clone)]
pub struct ExactBackend {
    table: ChannelTable,
}

impl ExactBackend {
    /// Perfect gates.
    pub fn ideal() -> Self {
        let u = |p: GeneratorPulse| Channel::unitary(&p.ideal_unitary());
        Self {
            table: ChannelTable::build(u, u),
        }
    }

    /// Every Clifford and every directly played pulse is its ideal unitary
    /// followed by `noise`.
    pub fn gate_independent(noise: Channel) -> Self {
        let mut table = ChannelTable::build(
            |p| Channel::unitary(&p.ideal_unitary()).then(&noise),
            |p| Channel::unitary(&p.ideal_unitary()),
        );
        for (c, ch) in enumerate().into_iter().zip(table.cliffords.iter_mut()) {
            *ch = Channel::unitary(&c.unitary()).then(&noise);
        }
        Self { table }
    }

    /// Gate-independent depolarizing noise with parameter `p` per gate.
    pub fn depolarizing(p: f64) -> Result<Self> {
        Ok(Self::gate_independent(Channel::depolarizing(p)?))
    }

    /// Each pulse is a rotation, with the injected overrotation and Y-axis
    /// skew from `noise`, followed by free decoherence over its time slot
    /// when `noise.use_decoherence` is set. Drive-dependent dephasing and
    /// the drive-line filter need the pulse simulator and are ignored.
    pub fn from_model(device: &DeviceParams, noise: &NoiseConfig, slot: f64) -> Result<Self> {
        device.validate()?;
        noise.validate()?;
        if !(slot >= 0.0) {
            return Err(Error::invalid("pulse slot must be non-negative"));
        }
        let decay = if noise.use_decoherence {
            Channel::decoherence(slot, device.t1, device.t2)?
        } else {
            Channel::identity()
        };
        let pulse = |p: GeneratorPulse, direct: bool| -> Channel {
            let (axis, angle) = match p.axis() {
                PulseAxis::None => return decay,
                PulseAxis::X => ([1.0, 0.0, 0.0], p.angle()),
                PulseAxis::Y => {
                    let phi = p.phase() + noise.axis_skew;
                    ([phi.cos(), phi.sin(), 0.0], p.angle())
                }
            };
            let eps = noise.overrotation_for(p, direct);
            let u = Unitary2::rotation(axis, angle + eps * angle.signum()).expect("unit axis");
            Channel::unitary(&u).then(&decay)
        };
        Ok(Self {
            table: ChannelTable::build(|p| pulse(p, true), |p| pulse(p, false)),
        })
    }

    /// Channel applied for a Clifford.
    pub fn clifford_channel(&self, c: CliffordElement) -> Channel {
        self.table.cliffords[c.index()]
    }
}

impl Backend for ExactBackend {
    fn channel(&self, gate: &Gate) -> Result<Channel> {
        Ok(self.table.get(gate))
    }
}

/// Wraps a backend with state-preparation and readout errors.
#[derive(Debug, Clone)]
pub struct SpamBackend<B> {
    pub inner: B,
    /// Applied to |0> before the sequence.
    pub preparation: Channel,
    /// Probability of reading 1 when the qubit is in |0>.
    pub p1_given_0: f64,
    /// Probability of reading 0 when the qubit is in |1>.
    pub p0_given_1: f64,
}

impl<B: Backend> Backend for SpamBackend<B> {
    fn channel(&self, gate: &Gate) -> Result<Channel> {
        self.inner.channel(gate)
    }

    fn survival(&self, gates: &[Gate]) -> Result<f64> {
        let mut v = self.preparation.superop() * crate::qchannel::ground_vec();
        for g in gates {
            v = self.inner.channel(g)?.superop() * v;
        }
        let p0 = v[0].re;
        Ok((1.0 - self.p1_given_0) * p0 + self.p0_given_1 * (1.0 - p0))
    }
}

/// Backend that simulates the transmon pulse by pulse.
///
/// Without a drive-line filter every pulse is simulated once and sequences
/// compose the cached channels. With a filter the pulses overlap, so every
/// sequence is simulated as one waveform, followed by `10 tau` of idle so
/// the last pulse's tail is played out.
#[derive(Debug, Clone)]
pub struct PulseBackend {
    device: DeviceParams,
    noise: NoiseConfig,
    gates: GateSet,
    opts: SimOptions,
    propagator: Arc<Propagator>,
    table: Option<ChannelTable>,
}

impl PulseBackend {
    pub fn new(device: DeviceParams, noise: NoiseConfig, gates: GateSet, opts: SimOptions) -> Result<Self> {
        gates.validate()?;
        let propagator = Arc::new(Propagator::new(device, noise, opts)?);
        let mut backend = Self {
            device,
            noise,
            gates,
            opts,
            propagator,
            table: None,
        };
        if noise.drive_filter_tau == 0.0 {
            let sims: Vec<(Channel, Channel)> = GeneratorPulse::ALL
                .par_iter()
                .map(|p| {
                    let direct = backend.isolated(*p, true)?;
                    let inner = if backend.noise.overrotation_for(*p, true) == backend.noise.overrotation_for(*p, false)
                    {
                        direct
                    } else {
                        backend.isolated(*p, false)?
                    };
                    Ok((direct, inner))
                })
                .collect::<Result<_>>()?;
            backend.table = Some(ChannelTable::build(|p| sims[p.index()].0, |p| sims[p.index()].1));
        }
        Ok(backend)
    }

    fn isolated(&self, pulse: GeneratorPulse, direct: bool) -> Result<Channel> {
        let w = self
            .gates
            .waveform(pulse, &self.noise, direct, self.device.anharmonicity);
        self.propagator.channel(&w)
    }

    pub fn device(&self) -> &DeviceParams {
        &self.device
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    pub fn gates(&self) -> &GateSet {
        &self.gates
    }

    pub fn options(&self) -> &SimOptions {
        &self.opts
    }

    /// Same device and noise with different pulse shapes.
    pub fn with_gates(&self, gates: GateSet) -> Result<Self> {
        Self::new(self.device, self.noise, gates, self.opts)
    }

    pub fn with_drag(&self, lambda: f64) -> Result<Self> {
        self.with_gates(self.gates.with_drag(lambda))
    }

    pub fn with_buffer(&self, buffer: f64) -> Result<Self> {
        self.with_gates(self.gates.with_buffer(buffer))
    }

    /// Whether sequences can be built from per-gate channels.
    pub fn history_free(&self) -> bool {
        self.table.is_some()
    }

    /// Full drive waveform of a gate list, without the settling tail.
    pub fn sequence_waveform(&self, gates: &[Gate]) -> Waveform {
        let mut parts = Vec::new();
        for g in gates {
            match g {
                Gate::Clifford(c) => {
                    for p in c.decompose() {
                        parts.push(self.gates.waveform(*p, &self.noise, false, self.device.anharmonicity));
                    }
                }
                Gate::Pulse(p) => parts.push(self.gates.waveform(*p, &self.noise, true, self.device.anharmonicity)),
            }
        }
        Waveform::concat(&parts)
    }

    fn settle(&self) -> f64 {
        10.0 * self.noise.drive_filter_tau
    }

    /// Channel of a whole gate list.
    pub fn sequence_channel(&self, gates: &[Gate]) -> Result<Channel> {
        match &self.table {
            Some(t) => Ok(gates.iter().fold(Channel::identity(), |acc, g| acc.then(&t.get(g)))),
            None => {
                let w = self.sequence_waveform(gates).with_idle(self.settle());
                self.propagator.channel(&w)
            }
        }
    }
}

impl Backend for PulseBackend {
    fn channel(&self, gate: &Gate) -> Result<Channel> {
        match &self.table {
            Some(t) => Ok(t.get(gate)),
            None => self.sequence_channel(std::slice::from_ref(gate)),
        }
    }

    fn survival(&self, gates: &[Gate]) -> Result<f64> {
        match &self.table {
            Some(t) => {
                let mut v = crate::qchannel::ground_vec();
                for g in gates {
                    v = t.get(g).superop() * v;
                }
                Ok(v[0].re)
            }
            None => {
                let ch = self.sequence_channel(gates)?;
                Ok((ch.superop() * crate::qchannel::ground_vec())[0].re)
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::qchannel::avg_gate_fidelity;

    #[test]
    fn ideal_backend_basics() {
        let b = ExactBackend::ideal();
        assert_eq!(b.survival(&[]).unwrap(), 1.0);
        assert!(b.survival(&[Gate::Pulse(GeneratorPulse::X180)]).unwrap().abs() < 1e-15);
    }

    #[test]
    fn model_backend_injects_only_direct_pulses() {
        let noise = NoiseConfig {
            overrotation_epsilon: 0.05,
            ..NoiseConfig::noiseless()
        };
        let b = ExactBackend::from_model(&DeviceParams::reference(), &noise, 20e-9).unwrap();
        let direct = b.channel(&Gate::Pulse(GeneratorPulse::X90)).unwrap();
        let inner = b.clifford_channel(GeneratorPulse::X90.clifford());
        assert!(avg_gate_fidelity(&inner, &GeneratorPulse::X90.ideal_unitary()).avg_fidelity() > 1.0 - 1e-14);
        let f = avg_gate_fidelity(&direct, &GeneratorPulse::X90.ideal_unitary()).avg_fidelity();
        let want = (4.0 * (0.025f64).cos().powi(2) + 2.0) / 6.0;
        assert!((f - want).abs() < 1e-12);
    }

    #[test]
    fn two_level_pulse_backend_is_nearly_ideal() {
        let gates = GateSet::new(20e-9, 0.0);
        let b = PulseBackend::new(
            DeviceParams::reference(),
            NoiseConfig::noiseless(),
            gates,
            SimOptions::two_level(),
        )
        .unwrap();
        for c in enumerate() {
            let ch = b.channel(&Gate::Clifford(c)).unwrap();
            let f = avg_gate_fidelity(&ch, &c.unitary()).avg_fidelity();
            assert!(1.0 - f < 1e-9, "{c}: {}", 1.0 - f);
        }
    }
}
