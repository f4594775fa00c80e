//! Lindblad propagation of the qubit-subspace block of the transmon
//! superoperator.
//!
//! Each of the four qubit matrix units `|a><b|` is evolved as a 3x3 operator;
//! at the end the outputs are projected back onto the qubit with the chosen
//! leakage model and assembled into a [`Channel`].

use nalgebra::{Matrix2, Matrix3, Matrix4};

use super::ode::{integrate, OdeState, Stats, Tolerances};
use super::{DeviceParams, LeakageModel, Levels, NoiseConfig, SimOptions, Waveform};
use crate::error::{Error, Result};
use crate::qchannel::{Channel, C64};

const I: C64 = C64::new(0.0, 1.0);
const MAX_FILTER_STAGES: usize = 2;

/// Evolved operators for the four qubit inputs, plus drive-line filter
/// states normalized by the drive scale.
#[derive(Debug, Clone)]
struct Block {
    rho: [Matrix3<C64>; 4],
    filter: [f64; 2 * MAX_FILTER_STAGES],
}

impl OdeState for Block {
    fn add_scaled(&self, terms: &[(f64, &Self)]) -> Self {
        let mut out = self.clone();
        for (c, v) in terms {
            let c = *c;
            for k in 0..4 {
                out.rho[k] += v.rho[k] * C64::from(c);
            }
            for (o, x) in out.filter.iter_mut().zip(&v.filter) {
                *o += c * x;
            }
        }
        out
    }

    fn error_ratio(err: &Self, a: &Self, b: &Self, rtol: f64, atol: f64) -> f64 {
        let mut worst = 0.0f64;
        for k in 0..4 {
            for ((e, x), y) in err.rho[k].iter().zip(a.rho[k].iter()).zip(b.rho[k].iter()) {
                worst = worst.max(e.norm() / (atol + rtol * x.norm().max(y.norm())));
            }
        }
        for ((e, x), y) in err.filter.iter().zip(&a.filter).zip(&b.filter) {
            worst = worst.max(e.abs() / (atol + rtol * x.abs().max(y.abs())));
        }
        worst
    }
}

/// Output of a simulation before projection onto the qubit.
#[derive(Debug, Clone)]
pub struct BlockOutput {
    rho: [Matrix3<C64>; 4],
}

impl BlockOutput {
    /// Qubit channel with leaked population mapped back by `model`.
    pub fn channel(&self, model: LeakageModel) -> Result<Channel> {
        let mut s = Matrix4::<C64>::zeros();
        for (col, out) in self.rho.iter().enumerate() {
            let mut q: Matrix2<C64> = out.fixed_view::<2, 2>(0, 0).into_owned();
            let leaked = out[(2, 2)];
            match model {
                LeakageModel::ToExcited => q[(1, 1)] += leaked,
                LeakageModel::ToMixed => {
                    q[(0, 0)] += leaked * 0.5;
                    q[(1, 1)] += leaked * 0.5;
                }
            }
            for c in 0..2 {
                for r in 0..2 {
                    s[(r + 2 * c, col)] = q[(r, c)];
                }
            }
        }
        let ch = Channel::new(s).map_err(|e| Error::Simulation {
            message: format!("propagated map failed the CPTP check: {e}"),
            time: f64::NAN,
            step: f64::NAN,
        })?;
        Ok(ch)
    }

    /// Population left in |2> for the inputs |0> and |1>.
    pub fn leakage(&self) -> [f64; 2] {
        [self.rho[0][(2, 2)].re, self.rho[3][(2, 2)].re]
    }
}

/// Lindblad integrator for a fixed device and noise setting.
#[derive(Debug, Clone)]
pub struct Propagator {
    device: DeviceParams,
    noise: NoiseConfig,
    opts: SimOptions,
    lower: Matrix3<C64>,
    number: Matrix3<C64>,
    static_h: Matrix3<C64>,
    relax_rate: f64,
    base_dephasing: f64,
}

impl Propagator {
    pub fn new(device: DeviceParams, noise: NoiseConfig, opts: SimOptions) -> Result<Self> {
        device.validate()?;
        noise.validate()?;
        if !(opts.rtol > 0.0 && opts.atol > 0.0 && opts.max_step > 0.0) {
            return Err(Error::invalid("integrator tolerances and max_step must be positive"));
        }
        let mut lower = Matrix3::<C64>::zeros();
        lower[(0, 1)] = C64::from(1.0);
        let mut number = Matrix3::<C64>::zeros();
        number[(1, 1)] = C64::from(1.0);
        let mut static_h = Matrix3::<C64>::zeros();
        if opts.levels == Levels::Three {
            lower[(1, 2)] = C64::from(2f64.sqrt());
            number[(2, 2)] = C64::from(2.0);
            static_h[(2, 2)] = C64::from(device.anharmonicity_angular());
        }
        let (relax_rate, base_dephasing) = if noise.use_decoherence {
            (1.0 / device.t1, (1.0 / device.t2 - 0.5 / device.t1).max(0.0))
        } else {
            (0.0, 0.0)
        };
        Ok(Self {
            device,
            noise,
            opts,
            lower,
            number,
            static_h,
            relax_rate,
            base_dephasing,
        })
    }

    pub fn device(&self) -> &DeviceParams {
        &self.device
    }

    pub fn noise(&self) -> &NoiseConfig {
        &self.noise
    }

    pub fn options(&self) -> &SimOptions {
        &self.opts
    }

    /// Filter time constants seen by a waveform: its own, then the drive
    /// line's.
    fn filter_stages(&self, w: &Waveform) -> Vec<f64> {
        [w.filter_tau(), self.noise.drive_filter_tau]
            .into_iter()
            .filter(|t| *t > 0.0)
            .collect()
    }

    fn tolerances(&self) -> Tolerances {
        Tolerances {
            rtol: self.opts.rtol,
            atol: self.opts.atol,
            max_step: self.opts.max_step,
            max_steps: self.opts.max_steps,
        }
    }

    fn initial_block() -> Block {
        let mut rho = [Matrix3::<C64>::zeros(); 4];
        for (col, m) in rho.iter_mut().enumerate() {
            m[(col % 2, col / 2)] = C64::from(1.0);
        }
        Block {
            rho,
            filter: [0.0; 2 * MAX_FILTER_STAGES],
        }
    }

    /// Right-hand side for the given drive. `cutoff` zeroes the raw input
    /// after that time (filter tails keep ringing down).
    fn rhs<'a>(
        &'a self,
        w: &'a Waveform,
        stages: &'a [f64],
        scale: f64,
        cutoff: f64,
    ) -> impl Fn(f64, &Block) -> Block + 'a {
        let lower = self.lower;
        let raise = lower.adjoint();
        let drive_x = lower + raise;
        let drive_y = raise * I - lower * I;
        let lower_number = raise * lower;
        let number = self.number;
        let number_sq = number * number;
        move |t, y| {
            let mut dfilter = [0.0; 2 * MAX_FILTER_STAGES];
            let (di, dq) = if stages.is_empty() {
                if t <= cutoff {
                    w.raw_at(t)
                } else {
                    (0.0, 0.0)
                }
            } else {
                let mut input = if t <= cutoff {
                    let (a, b) = w.raw_at(t);
                    (a / scale, b / scale)
                } else {
                    (0.0, 0.0)
                };
                for (s, tau) in stages.iter().enumerate() {
                    let u = (y.filter[2 * s], y.filter[2 * s + 1]);
                    dfilter[2 * s] = (input.0 - u.0) / tau;
                    dfilter[2 * s + 1] = (input.1 - u.1) / tau;
                    input = u;
                }
                (input.0 * scale, input.1 * scale)
            };
            let gamma_phi = self.base_dephasing + self.noise.drive_dephasing_k * di.hypot(dq);
            let deph = 2.0 * gamma_phi;
            let relax = self.relax_rate;
            let h = self.static_h + drive_x * C64::from(0.5 * di) + drive_y * C64::from(0.5 * dq);
            let h_eff = h - (lower_number * C64::from(relax) + number_sq * C64::from(deph)) * (0.5 * I);
            let h_eff_dag = h_eff.adjoint();
            let mut out = Block {
                rho: [Matrix3::zeros(); 4],
                filter: dfilter,
            };
            for k in 0..4 {
                let r = &y.rho[k];
                let mut d = (h_eff * r - r * h_eff_dag) * (-I);
                if relax > 0.0 {
                    d += lower * r * raise * C64::from(relax);
                }
                if deph > 0.0 {
                    d += number * r * number * C64::from(deph);
                }
                out.rho[k] = d;
            }
            out
        }
    }

    fn advance(
        &self,
        w: &Waveform,
        stages: &[f64],
        scale: f64,
        cutoff: f64,
        mut y: Block,
        times: &[f64],
        h: &mut f64,
        stats: &mut Stats,
    ) -> Result<Block> {
        let f = self.rhs(w, stages, scale, cutoff);
        let tol = self.tolerances();
        for pair in times.windows(2) {
            let (next, last) = integrate(&f, pair[0], pair[1], y, *h, &tol, stats)?;
            y = next;
            *h = last;
        }
        Ok(y)
    }

    /// Simulates `w` and returns the unprojected output.
    pub fn evolve(&self, w: &Waveform) -> Result<BlockOutput> {
        let mut out = self.evolve_at(w, &[w.duration()], 0.0)?;
        Ok(out.pop().expect("one snapshot"))
    }

    /// Qubit channel implemented by `w`.
    pub fn channel(&self, w: &Waveform) -> Result<Channel> {
        self.evolve(w)?.channel(self.opts.leakage)
    }

    /// Channels from time zero to each of `times` (ascending, within the
    /// waveform). When a drive-line filter is active each snapshot is taken
    /// after cutting the input at that time and letting the filter ring
    /// down for `settle` seconds.
    pub fn channels_at(&self, w: &Waveform, times: &[f64], settle: f64) -> Result<Vec<Channel>> {
        self.evolve_at(w, times, settle)?
            .iter()
            .map(|b| b.channel(self.opts.leakage))
            .collect()
    }

    fn evolve_at(&self, w: &Waveform, times: &[f64], settle: f64) -> Result<Vec<BlockOutput>> {
        if times.windows(2).any(|p| p[1] < p[0]) {
            return Err(Error::invalid("snapshot times must be ascending"));
        }
        let stages = self.filter_stages(w);
        if stages.len() > MAX_FILTER_STAGES {
            return Err(Error::invalid("at most two cascaded drive filters are supported"));
        }
        let scale = w.peak().max(1.0);
        let mut cuts: Vec<f64> = w.breakpoints();
        cuts.extend(times.iter().copied());
        cuts.sort_by(f64::total_cmp);
        cuts.dedup_by(|a, b| (*a - *b).abs() < 1e-18);

        let mut stats = Stats::default();
        let mut h = self.opts.max_step.min(1e-12);
        let mut y = Self::initial_block();
        let mut t = 0.0;
        let mut outputs = Vec::with_capacity(times.len());
        for &snap in times {
            let mut span: Vec<f64> = vec![t];
            span.extend(cuts.iter().copied().filter(|c| *c > t && *c < snap));
            span.push(snap);
            y = self.advance(w, &stages, scale, f64::INFINITY, y, &span, &mut h, &mut stats)?;
            t = snap;
            if stages.is_empty() || settle <= 0.0 {
                outputs.push(BlockOutput { rho: y.rho });
            } else {
                let mut hs = h;
                let tail = self.advance(
                    w,
                    &stages,
                    scale,
                    snap,
                    y.clone(),
                    &[snap, snap + settle],
                    &mut hs,
                    &mut stats,
                )?;
                outputs.push(BlockOutput { rho: tail.rho });
            }
        }
        Ok(outputs)
    }
}

/// Qubit channel implemented by `w` on `device` under `noise`.
pub fn propagate(w: &Waveform, device: &DeviceParams, noise: &NoiseConfig, opts: &SimOptions) -> Result<Channel> {
    Propagator::new(*device, *noise, *opts)?.channel(w)
}

/// Like [`propagate`] but also returns the leaked populations.
pub fn propagate_with(
    w: &Waveform,
    device: &DeviceParams,
    noise: &NoiseConfig,
    opts: &SimOptions,
) -> Result<(Channel, [f64; 2])> {
    let out = Propagator::new(*device, *noise, *opts)?.evolve(w)?;
    Ok((out.channel(opts.leakage)?, out.leakage()))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::GeneratorPulse;
    use crate::qchannel::{avg_gate_fidelity, Channel};
    use crate::transmon::{gaussian_drag_waveform, GateSpec};

    fn device() -> DeviceParams {
        DeviceParams::reference()
    }

    #[test]
    fn idle_matches_closed_form_decoherence() {
        let w = Waveform::idle(2e-6);
        let got = propagate(&w, &device(), &NoiseConfig::decoherence_only(), &SimOptions::default()).unwrap();
        let want = Channel::decoherence(2e-6, 45e-6, 53e-6).unwrap();
        assert!(got.distance(&want) < 1e-9, "distance {}", got.distance(&want));
    }

    #[test]
    fn two_level_area_pulse_is_exact() {
        let spec = GateSpec::new(GeneratorPulse::X90, 16.7e-9);
        let w = gaussian_drag_waveform(&spec, device().anharmonicity);
        let ch = propagate(&w, &device(), &NoiseConfig::noiseless(), &SimOptions::two_level()).unwrap();
        let f = avg_gate_fidelity(&ch, &GeneratorPulse::X90.ideal_unitary());
        assert!(1.0 - f.avg_fidelity() < 1e-9, "infidelity {}", 1.0 - f.avg_fidelity());
    }

    #[test]
    fn three_level_pulse_leaks_without_drag() {
        let spec = GateSpec::new(GeneratorPulse::X180, 5e-9);
        let w = gaussian_drag_waveform(&spec, device().anharmonicity);
        let (_, leak) = propagate_with(&w, &device(), &NoiseConfig::noiseless(), &SimOptions::default()).unwrap();
        assert!(leak[0] > 1e-5, "leakage {leak:?}");
    }

    #[test]
    fn filtered_snapshot_at_end_matches_settled_run() {
        let spec = GateSpec::new(GeneratorPulse::X90, 10e-9).with_buffer(5e-9);
        let w = gaussian_drag_waveform(&spec, device().anharmonicity);
        let noise = NoiseConfig {
            drive_filter_tau: 1e-9,
            ..NoiseConfig::noiseless()
        };
        let p = Propagator::new(device(), noise, SimOptions::two_level()).unwrap();
        let settle = 20e-9;
        let snap = p.channels_at(&w, &[w.duration()], settle).unwrap();
        let long = p.channel(&w.clone().with_idle(settle)).unwrap();
        assert!(snap[0].distance(&long) < 1e-8);
    }
}
