//! Adaptive Dormand-Prince 5(4) integrator for small linear systems.

use crate::error::{Error, Result};

/// Vector-space operations needed by the integrator.
pub trait OdeState: Clone {
    /// `self + sum_k c_k * v_k`.
    fn add_scaled(&self, terms: &[(f64, &Self)]) -> Self;
    /// Largest per-component `|err| / (atol + rtol * max(|a|, |b|))`.
    fn error_ratio(err: &Self, a: &Self, b: &Self, rtol: f64, atol: f64) -> f64;
}

#[derive(Debug, Clone, Copy)]
pub struct Tolerances {
    pub rtol: f64,
    pub atol: f64,
    pub max_step: f64,
    pub max_steps: usize,
}

#[derive(Debug, Clone, Copy, Default)]
pub struct Stats {
    pub accepted: usize,
    pub rejected: usize,
}

const C2: f64 = 1.0 / 5.0;
const C3: f64 = 3.0 / 10.0;
const C4: f64 = 4.0 / 5.0;
const C5: f64 = 8.0 / 9.0;

const A21: f64 = 1.0 / 5.0;
const A31: f64 = 3.0 / 40.0;
const A32: f64 = 9.0 / 40.0;
const A41: f64 = 44.0 / 45.0;
const A42: f64 = -56.0 / 15.0;
const A43: f64 = 32.0 / 9.0;
const A51: f64 = 19372.0 / 6561.0;
const A52: f64 = -25360.0 / 2187.0;
const A53: f64 = 64448.0 / 6561.0;
const A54: f64 = -212.0 / 729.0;
const A61: f64 = 9017.0 / 3168.0;
const A62: f64 = -355.0 / 33.0;
const A63: f64 = 46732.0 / 5247.0;
const A64: f64 = 49.0 / 176.0;
const A65: f64 = -5103.0 / 18656.0;
const B1: f64 = 35.0 / 384.0;
const B3: f64 = 500.0 / 1113.0;
const B4: f64 = 125.0 / 192.0;
const B5: f64 = -2187.0 / 6784.0;
const B6: f64 = 11.0 / 84.0;
// Fifth-order minus embedded fourth-order weights.
const E1: f64 = 71.0 / 57600.0;
const E3: f64 = -71.0 / 16695.0;
const E4: f64 = 71.0 / 1920.0;
const E5: f64 = -17253.0 / 339200.0;
const E6: f64 = 22.0 / 525.0;
const E7: f64 = -1.0 / 40.0;

/// Integrates `dy/dt = f(t, y)` from `t0` to `t1`, starting with step `h0`.
/// Returns the state at `t1` and the last accepted step size.
pub fn integrate<S, F>(f: &F, t0: f64, t1: f64, y0: S, h0: f64, tol: &Tolerances, stats: &mut Stats) -> Result<(S, f64)>
where
    S: OdeState,
    F: Fn(f64, &S) -> S,
{
    let span = t1 - t0;
    if span <= 0.0 {
        return Ok((y0, h0));
    }
    let mut t = t0;
    let mut y = y0;
    let mut h = h0.min(tol.max_step).min(span);
    let mut k1 = f(t, &y);
    let mut last_ok = h;
    let mut steps = 0usize;
    while t < t1 {
        steps += 1;
        if steps > tol.max_steps {
            return Err(Error::Simulation {
                message: format!("exceeded {} integration steps", tol.max_steps),
                time: t,
                step: h,
            });
        }
        let mut final_step = false;
        if t + h >= t1 || t1 - (t + h) < 1e-12 * span {
            h = t1 - t;
            final_step = true;
        }
        let k2 = f(t + C2 * h, &y.add_scaled(&[(h * A21, &k1)]));
        let k3 = f(t + C3 * h, &y.add_scaled(&[(h * A31, &k1), (h * A32, &k2)]));
        let k4 = f(
            t + C4 * h,
            &y.add_scaled(&[(h * A41, &k1), (h * A42, &k2), (h * A43, &k3)]),
        );
        let k5 = f(
            t + C5 * h,
            &y.add_scaled(&[(h * A51, &k1), (h * A52, &k2), (h * A53, &k3), (h * A54, &k4)]),
        );
        let k6 = f(
            t + h,
            &y.add_scaled(&[
                (h * A61, &k1),
                (h * A62, &k2),
                (h * A63, &k3),
                (h * A64, &k4),
                (h * A65, &k5),
            ]),
        );
        let y_new = y.add_scaled(&[
            (h * B1, &k1),
            (h * B3, &k3),
            (h * B4, &k4),
            (h * B5, &k5),
            (h * B6, &k6),
        ]);
        let k7 = f(t + h, &y_new);
        // Error estimate built as a combination of stages around a zero state.
        let zero = y.add_scaled(&[(-1.0, &y)]);
        let err = zero.add_scaled(&[
            (h * E1, &k1),
            (h * E3, &k3),
            (h * E4, &k4),
            (h * E5, &k5),
            (h * E6, &k6),
            (h * E7, &k7),
        ]);
        let ratio = S::error_ratio(&err, &y, &y_new, tol.rtol, tol.atol);
        if !ratio.is_finite() {
            return Err(Error::Simulation {
                message: "non-finite error estimate".into(),
                time: t,
                step: h,
            });
        }
        if ratio <= 1.0 {
            t = if final_step { t1 } else { t + h };
            y = y_new;
            k1 = k7;
            last_ok = h;
            stats.accepted += 1;
            let grow = if ratio == 0.0 {
                5.0
            } else {
                (0.9 * ratio.powf(-0.2)).clamp(0.2, 5.0)
            };
            h = (h * grow).min(tol.max_step);
        } else {
            stats.rejected += 1;
            h *= (0.9 * ratio.powf(-0.25)).clamp(0.1, 0.9);
            if h < 1e-14 * span.max(t.abs()) {
                return Err(Error::Simulation {
                    message: "step size underflow".into(),
                    time: t,
                    step: h,
                });
            }
        }
    }
    Ok((y, last_ok))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[derive(Clone, Debug)]
    struct V(Vec<f64>);

    impl OdeState for V {
        fn add_scaled(&self, terms: &[(f64, &Self)]) -> Self {
            let mut out = self.0.clone();
            for (c, v) in terms {
                for (o, x) in out.iter_mut().zip(&v.0) {
                    *o += c * x;
                }
            }
            V(out)
        }
        fn error_ratio(err: &Self, a: &Self, b: &Self, rtol: f64, atol: f64) -> f64 {
            err.0
                .iter()
                .zip(a.0.iter().zip(&b.0))
                .map(|(e, (x, y))| e.abs() / (atol + rtol * x.abs().max(y.abs())))
                .fold(0.0, f64::max)
        }
    }

    fn tol(rtol: f64) -> Tolerances {
        Tolerances {
            rtol,
            atol: 1e-14,
            max_step: f64::INFINITY,
            max_steps: 1_000_000,
        }
    }

    #[test]
    fn harmonic_oscillator() {
        let w = 2.0 * std::f64::consts::PI;
        let f = |_t: f64, y: &V| V(vec![y.0[1], -w * w * y.0[0]]);
        let mut stats = Stats::default();
        let (y, _) = integrate(&f, 0.0, 3.25, V(vec![1.0, 0.0]), 1e-3, &tol(1e-11), &mut stats).unwrap();
        assert!((y.0[0] - (w * 3.25).cos()).abs() < 1e-9);
        assert!((y.0[1] + w * (w * 3.25).sin()).abs() < 1e-8);
        assert!(stats.accepted > 10);
    }

    #[test]
    fn time_dependent_decay() {
        // y' = -2 t y, y = exp(-t^2).
        let f = |t: f64, y: &V| V(vec![-2.0 * t * y.0[0]]);
        let mut stats = Stats::default();
        let (y, _) = integrate(&f, 0.0, 2.0, V(vec![1.0]), 1e-2, &tol(1e-12), &mut stats).unwrap();
        assert!((y.0[0] - (-4.0f64).exp()).abs() < 1e-12);
    }

    #[test]
    fn step_limit_reports_simulation_error() {
        let f = |_t: f64, y: &V| V(vec![-y.0[0]]);
        let mut stats = Stats::default();
        let mut t = tol(1e-10);
        t.max_steps = 3;
        t.max_step = 1e-3;
        let err = integrate(&f, 0.0, 1.0, V(vec![1.0]), 1e-3, &t, &mut stats).unwrap_err();
        assert!(matches!(err, Error::Simulation { .. }));
    }
}
