//! Drive envelopes: lifted truncated Gaussians with a derivative (DRAG)
//! quadrature, and a single-pole drive-line filter.
//!
//! A [`Waveform`] keeps its continuous-time description so the master
//! equation integrator can evaluate the drive at any instant. `samples()`
//! renders it on a uniform grid of midpoints `t_k = (k + 1/2) dt`.

use std::f64::consts::TAU;

use serde::{Deserialize, Serialize};
use statrs::function::erf::erf;

use super::GateSpec;

/// Default sample spacing for rendered waveforms.
pub const DEFAULT_SAMPLE_DT: f64 = 5e-12;

/// One lifted-Gaussian pulse placed on the time axis.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PlacedPulse {
    /// Start time in seconds.
    pub start: f64,
    /// Pulse length (the Gaussian is truncated at +/- length/2).
    pub length: f64,
    pub sigma: f64,
    /// Signed peak amplitude of the in-phase envelope, rad/s.
    pub amplitude: f64,
    /// Coefficient multiplying the envelope derivative on the quadrature,
    /// `-drag_lambda / (2 pi anharmonicity)` in seconds.
    pub drag_coeff: f64,
    /// Drive phase: rotates (in-phase, quadrature) jointly.
    pub phase: f64,
}

impl PlacedPulse {
    fn end(&self) -> f64 {
        self.start + self.length
    }

    /// Normalized lifted Gaussian and its time derivative at local time `s`.
    fn shape(&self, s: f64) -> (f64, f64) {
        if !(0.0..=self.length).contains(&s) {
            return (0.0, 0.0);
        }
        let c = self.length / 2.0;
        let edge = (-(c * c) / (2.0 * self.sigma * self.sigma)).exp();
        let x = s - c;
        let g = (-(x * x) / (2.0 * self.sigma * self.sigma)).exp();
        let norm = 1.0 - edge;
        ((g - edge) / norm, -x / (self.sigma * self.sigma) * g / norm)
    }

    /// Rotated (in-phase, quadrature) drive at absolute time `t`.
    pub fn eval(&self, t: f64) -> (f64, f64) {
        let (g, dg) = self.shape(t - self.start);
        let i = self.amplitude * g;
        let q = self.drag_coeff * self.amplitude * dg;
        let (sn, cs) = self.phase.sin_cos();
        (i * cs - q * sn, i * sn + q * cs)
    }
}

/// Integral of the unit-peak lifted Gaussian of the given length and width.
pub fn lifted_gaussian_area(length: f64, sigma: f64) -> f64 {
    let c = length / 2.0;
    let edge = (-(c * c) / (2.0 * sigma * sigma)).exp();
    let gauss = sigma * TAU.sqrt() * erf(c / (std::f64::consts::SQRT_2 * sigma));
    (gauss - length * edge) / (1.0 - edge)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
enum Envelope {
    Pulses(Vec<PlacedPulse>),
    /// Midpoint samples, linearly interpolated, held constant past the ends.
    Sampled(Vec<(f64, f64)>),
}

/// Two-quadrature drive envelope of fixed duration, in rad/s.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Waveform {
    dt: f64,
    duration: f64,
    envelope: Envelope,
    filter_tau: f64,
}

impl Waveform {
    /// Idle drive of the given duration.
    pub fn idle(duration: f64) -> Self {
        Self {
            dt: DEFAULT_SAMPLE_DT,
            duration,
            envelope: Envelope::Pulses(Vec::new()),
            filter_tau: 0.0,
        }
    }

    /// Arbitrary sampled envelope; `samples[k]` is the value at `(k + 1/2) dt`.
    pub fn from_samples(samples: Vec<(f64, f64)>, dt: f64) -> Self {
        Self {
            dt,
            duration: samples.len() as f64 * dt,
            envelope: Envelope::Sampled(samples),
            filter_tau: 0.0,
        }
    }

    pub(crate) fn from_pulses(pulses: Vec<PlacedPulse>, duration: f64) -> Self {
        Self {
            dt: DEFAULT_SAMPLE_DT,
            duration,
            envelope: Envelope::Pulses(pulses),
            filter_tau: 0.0,
        }
    }

    pub fn with_sample_dt(mut self, dt: f64) -> Self {
        if let Envelope::Pulses(_) = self.envelope {
            self.dt = dt;
        }
        self
    }

    pub fn dt(&self) -> f64 {
        self.dt
    }

    pub fn duration(&self) -> f64 {
        self.duration
    }

    pub fn filter_tau(&self) -> f64 {
        self.filter_tau
    }

    pub fn len(&self) -> usize {
        (self.duration / self.dt).round() as usize
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Pulses in this waveform (empty for sampled envelopes).
    pub fn pulses(&self) -> &[PlacedPulse] {
        match &self.envelope {
            Envelope::Pulses(p) => p,
            Envelope::Sampled(_) => &[],
        }
    }

    /// Unfiltered drive at time `t`.
    pub fn raw_at(&self, t: f64) -> (f64, f64) {
        match &self.envelope {
            Envelope::Pulses(pulses) => {
                pulses
                    .iter()
                    .filter(|p| t >= p.start && t <= p.end())
                    .fold((0.0, 0.0), |(a, b), p| {
                        let (i, q) = p.eval(t);
                        (a + i, b + q)
                    })
            }
            Envelope::Sampled(s) => {
                if s.is_empty() {
                    return (0.0, 0.0);
                }
                let pos = t / self.dt - 0.5;
                if pos <= 0.0 {
                    return s[0];
                }
                let k = pos.floor() as usize;
                if k + 1 >= s.len() {
                    return s[s.len() - 1];
                }
                let f = pos - k as f64;
                (s[k].0 + f * (s[k + 1].0 - s[k].0), s[k].1 + f * (s[k + 1].1 - s[k].1))
            }
        }
    }

    /// Times at which the unfiltered drive or its derivative may jump.
    pub(crate) fn breakpoints(&self) -> Vec<f64> {
        let mut pts = vec![0.0, self.duration];
        if let Envelope::Pulses(pulses) = &self.envelope {
            for p in pulses {
                pts.push(p.start.clamp(0.0, self.duration));
                pts.push(p.end().clamp(0.0, self.duration));
            }
        }
        pts.sort_by(f64::total_cmp);
        pts.dedup_by(|a, b| (*a - *b).abs() < 1e-18);
        pts
    }

    /// Largest drive magnitude over the rendered samples.
    pub fn peak(&self) -> f64 {
        match &self.envelope {
            Envelope::Pulses(pulses) => pulses
                .iter()
                .map(|p| p.amplitude.abs() * (1.0 + (p.drag_coeff / p.sigma).abs()))
                .fold(0.0, f64::max),
            Envelope::Sampled(s) => s.iter().map(|(i, q)| i.hypot(*q)).fold(0.0, f64::max),
        }
    }

    /// Concatenates waveforms back to back. All parts must be unfiltered
    /// pulse envelopes.
    pub fn concat(parts: &[Waveform]) -> Waveform {
        let mut pulses = Vec::new();
        let mut offset = 0.0;
        for w in parts {
            debug_assert_eq!(w.filter_tau, 0.0, "concatenate before filtering");
            match &w.envelope {
                Envelope::Pulses(ps) => pulses.extend(ps.iter().map(|p| PlacedPulse {
                    start: p.start + offset,
                    ..*p
                })),
                Envelope::Sampled(_) => panic!("concatenation of sampled envelopes is not supported"),
            }
            offset += w.duration;
        }
        Waveform::from_pulses(pulses, offset)
    }

    /// Extends the waveform with `extra` seconds of zero drive.
    pub fn with_idle(mut self, extra: f64) -> Waveform {
        if let Envelope::Sampled(s) = &mut self.envelope {
            let n = (extra / self.dt).round() as usize;
            s.extend(std::iter::repeat_n((0.0, 0.0), n));
            self.duration = s.len() as f64 * self.dt;
        } else {
            self.duration += extra;
        }
        self
    }

    /// Rendered (in-phase, quadrature) samples at the grid midpoints, after
    /// the drive-line filter if one is set.
    pub fn samples(&self) -> Vec<(f64, f64)> {
        let n = self.len();
        let dt = self.dt;
        if self.filter_tau == 0.0 {
            return (0..n).map(|k| self.raw_at((k as f64 + 0.5) * dt)).collect();
        }
        let tau = self.filter_tau;
        let mut out = Vec::with_capacity(n);
        let mut y = (0.0, 0.0);
        let mut t = 0.0;
        for k in 0..n {
            let target = (k as f64 + 0.5) * dt;
            y = self.filter_advance(y, t, target, tau);
            t = target;
            out.push(y);
        }
        out
    }

    /// Advances the filter state from `t0` to `t1`, exactly across each
    /// linear piece of the input.
    fn filter_advance(&self, mut y: (f64, f64), t0: f64, t1: f64, tau: f64) -> (f64, f64) {
        let substeps = match self.envelope {
            Envelope::Pulses(_) => 16,
            Envelope::Sampled(_) => 1,
        };
        // Linear-piece boundaries of the sampled envelope sit on the midpoints,
        // which are exactly the render points, so one piece per interval.
        let h = (t1 - t0) / substeps as f64;
        if h <= 0.0 {
            return y;
        }
        let decay = (-h / tau).exp();
        for s in 0..substeps {
            let a = t0 + s as f64 * h;
            let (xa, xb) = (self.raw_at(a), self.raw_at(a + h));
            let slope = ((xb.0 - xa.0) / h, (xb.1 - xa.1) / h);
            y = (
                xb.0 - slope.0 * tau + (y.0 - xa.0 + slope.0 * tau) * decay,
                xb.1 - slope.1 * tau + (y.1 - xa.1 + slope.1 * tau) * decay,
            );
        }
        y
    }

    /// Filtered output at an arbitrary time `t`, integrated from zero.
    pub fn filtered_at(&self, t: f64) -> (f64, f64) {
        if self.filter_tau == 0.0 {
            return self.raw_at(t);
        }
        let n = (t / self.dt).ceil().max(1.0) as usize;
        let h = t / n as f64;
        let mut y = (0.0, 0.0);
        for k in 0..n {
            y = self.filter_advance(y, k as f64 * h, (k + 1) as f64 * h, self.filter_tau);
        }
        y
    }
}

/// Lifted truncated Gaussian on the in-phase channel with the DRAG
/// derivative `-drag_lambda * (d/dt in-phase) / (2 pi anharmonicity)` on the
/// quadrature, followed by `spec.buffer` of idle. `anharmonicity` is in Hz.
/// With this sign `drag_lambda = 1` removes leakage to first order.
pub fn gaussian_drag_waveform(spec: &GateSpec, anharmonicity: f64) -> Waveform {
    let pulses = if spec.amplitude == 0.0 {
        Vec::new()
    } else {
        vec![PlacedPulse {
            start: 0.0,
            length: spec.gate_length,
            sigma: spec.sigma(),
            amplitude: spec.amplitude,
            drag_coeff: -spec.drag_lambda / (TAU * anharmonicity),
            phase: spec.phase,
        }]
    };
    Waveform::from_pulses(pulses, spec.gate_length + spec.buffer)
}

/// Single-pole low-pass filter with time constant `tau` applied to both
/// quadratures. `tau = 0` returns the input.
pub fn drive_line_filter(w: &Waveform, tau: f64) -> Waveform {
    if tau <= 0.0 {
        return w.clone();
    }
    if w.filter_tau == 0.0 {
        return Waveform {
            filter_tau: tau,
            ..w.clone()
        };
    }
    // Cascade: freeze the first stage into samples.
    let mut staged = Waveform::from_samples(w.samples(), w.dt);
    staged.filter_tau = tau;
    staged
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::clifford::GeneratorPulse;
    use approx::assert_abs_diff_eq;
    use std::f64::consts::PI;

    const DELTA: f64 = -323e6;

    fn x180(lambda: f64) -> GateSpec {
        GateSpec::new(GeneratorPulse::X180, 16.7e-9).with_drag(lambda)
    }

    #[test]
    fn zero_lambda_has_no_quadrature() {
        let w = gaussian_drag_waveform(&x180(0.0), DELTA);
        assert!(w.samples().iter().all(|&(_, q)| q == 0.0));
    }

    #[test]
    fn area_normalization() {
        let w = gaussian_drag_waveform(&x180(0.5), DELTA);
        let area: f64 = w.samples().iter().map(|s| s.0).sum::<f64>() * w.dt();
        assert_abs_diff_eq!(area, PI, epsilon = 1e-6);
        assert_abs_diff_eq!(w.len() as f64 * w.dt(), 16.7e-9, epsilon = 1e-15);
    }

    #[test]
    fn envelope_symmetry() {
        let w = gaussian_drag_waveform(&x180(0.7), DELTA);
        let s = w.samples();
        let n = s.len();
        let peak = w.peak();
        for k in 0..n / 2 {
            let (a, b) = (s[k], s[n - 1 - k]);
            assert!((a.0 - b.0).abs() <= 1e-12 * peak, "in-phase not even at {k}");
            assert!((a.1 + b.1).abs() <= 1e-12 * peak, "quadrature not odd at {k}");
        }
        assert!(s.iter().any(|v| v.1.abs() > 0.0));
    }

    #[test]
    fn endpoints_are_zero() {
        let spec = x180(0.0);
        let w = gaussian_drag_waveform(&spec, DELTA);
        assert_abs_diff_eq!(w.raw_at(0.0).0, 0.0, epsilon = 1e-6);
        assert_abs_diff_eq!(w.raw_at(spec.gate_length).0, 0.0, epsilon = 1e-6);
    }

    #[test]
    fn phase_rotates_both_quadratures() {
        let x = gaussian_drag_waveform(&x180(0.5), DELTA);
        let mut y_spec = x180(0.5);
        y_spec.phase = PI / 2.0;
        let y = gaussian_drag_waveform(&y_spec, DELTA);
        for (a, b) in x.samples().iter().zip(y.samples()) {
            assert_abs_diff_eq!(b.1, a.0, epsilon = 1e-6);
            assert_abs_diff_eq!(b.0, -a.1, epsilon = 1e-6);
        }
    }

    #[test]
    fn filter_zero_tau_is_identity() {
        let w = gaussian_drag_waveform(&x180(0.5), DELTA);
        assert_eq!(drive_line_filter(&w, 0.0), w);
    }

    #[test]
    fn filter_step_response() {
        let dt = 1e-11;
        let tau = 20.5 * dt;
        let step = Waveform::from_samples(vec![(1.0, 0.5); 400], dt);
        let out = drive_line_filter(&step, tau).samples();
        // Sample 20 sits at t = 20.5 dt = tau.
        assert_abs_diff_eq!(out[20].0, 1.0 - (-1.0f64).exp(), epsilon = 1e-6);
        assert_abs_diff_eq!(out[20].1, 0.5 * (1.0 - (-1.0f64).exp()), epsilon = 1e-6);
        for (k, v) in out.iter().enumerate() {
            let t = (k as f64 + 0.5) * dt;
            assert_abs_diff_eq!(v.0, 1.0 - (-t / tau).exp(), epsilon = 1e-12);
        }
    }

    #[test]
    fn filter_preserves_area_and_spills_into_buffer() {
        let mut spec = GateSpec::new(GeneratorPulse::X90, 10e-9);
        spec.buffer = 40e-9;
        let w = gaussian_drag_waveform(&spec, DELTA);
        let f = drive_line_filter(&w, 2e-9);
        let area_raw: f64 = w.samples().iter().map(|s| s.0).sum::<f64>() * w.dt();
        let fs = f.samples();
        let area_filt: f64 = fs.iter().map(|s| s.0).sum::<f64>() * f.dt();
        assert_abs_diff_eq!(area_filt, area_raw, epsilon = 1e-6);
        let k_after = (12e-9 / f.dt()) as usize;
        assert!(fs[k_after].0 > 1e-3 * w.peak());
        assert_abs_diff_eq!(f.filtered_at(49e-9).0, 0.0, epsilon = 1e-3 * w.peak());
    }

    #[test]
    fn analytic_area_matches_quadrature() {
        let (len, sigma) = (20e-9, 5e-9);
        let p = PlacedPulse {
            start: 0.0,
            length: len,
            sigma,
            amplitude: 1.0,
            drag_coeff: 0.0,
            phase: 0.0,
        };
        let n = 200_000;
        let h = len / n as f64;
        let sum: f64 = (0..n).map(|k| p.eval((k as f64 + 0.5) * h).0).sum::<f64>() * h;
        assert_abs_diff_eq!(sum / lifted_gaussian_area(len, sigma), 1.0, epsilon = 1e-9);
    }
}
