use serde::{Deserialize, Serialize};

use super::DecaySeries;
use crate::clifford::avg_generators_per_clifford;
use crate::error::{Error, Result};
use crate::fit::{levenberg_marquardt, t95, LmOptions};

/// Fit of `A alpha^m + B` to a decay series.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayFit {
    pub a: f64,
    pub alpha: f64,
    pub b: f64,
    pub alpha_stderr: f64,
    /// Student-t 95% interval for alpha.
    pub alpha_ci95: [f64; 2],
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// Error per Clifford, `(1 - alpha) / 2`.
    pub r_clifford: f64,
    /// Error per generator pulse, using the decomposition table's average.
    pub r_generator: f64,
    pub iterations: usize,
}

const ALPHA_MAX: f64 = 1.05;

/// Two-point estimate of alpha from the first and last means, assuming
/// `B = 1/2`.
fn initial_alpha(x: &[f64], y: &[f64]) -> f64 {
    let (x0, y0) = (x[0], y[0] - 0.5);
    let (x1, y1) = (x[x.len() - 1], y[y.len() - 1] - 0.5);
    let ratio = y1 / y0;
    if !(ratio > 0.0) || !ratio.is_finite() || x1 <= x0 {
        return 0.9;
    }
    ratio.powf(1.0 / (x1 - x0)).clamp(0.5, 1.0)
}

/// Nonlinear least-squares fit of `A alpha^m + B` to the series means.
pub fn fit_decay(series: &DecaySeries) -> Result<DecayFit> {
    let with_series = |e: Error| match e {
        Error::Fit { message, .. } => Error::Fit {
            message,
            series: Some(Box::new(series.clone())),
        },
        other => other,
    };
    let x: Vec<f64> = series.x.iter().map(|v| *v as f64).collect();
    let y = &series.y_mean;
    if x.len() < 4 {
        return Err(with_series(Error::fit("decay fit needs at least 4 lengths")));
    }
    if y.iter().any(|v| !v.is_finite()) {
        return Err(with_series(Error::fit("non-finite survival probability")));
    }
    let model = |p: &[f64], m: f64| {
        let e = p[1].powf(m);
        let de = if m == 0.0 { 0.0 } else { m * p[1].powf(m - 1.0) };
        (p[0] * e + p[2], vec![e, p[0] * de, 1.0])
    };
    let mut opts = LmOptions::unbounded(3);
    // Survival stays a probability; without these the fit can run off to
    // the straight-line limit A -> inf, B -> -inf on outlier-heavy data.
    opts.bounds[0] = (0.0, 1.0);
    opts.bounds[1] = (1e-9, ALPHA_MAX);
    opts.bounds[2] = (0.0, 1.0);
    let p0 = [0.5, initial_alpha(&x, y), 0.5];
    let fit = levenberg_marquardt(model, &x, y, &p0, &opts).map_err(with_series)?;
    let alpha = fit.params[1];
    let se = fit.stderr(1);
    let half = t95(x.len().saturating_sub(3)) * se;
    let r_clifford = (1.0 - alpha) / 2.0;
    Ok(DecayFit {
        a: fit.params[0],
        alpha,
        b: fit.params[2],
        alpha_stderr: se,
        alpha_ci95: [alpha - half, alpha + half],
        residuals: fit.residuals,
        rss: fit.rss,
        r_clifford,
        r_generator: r_clifford / avg_generators_per_clifford(),
        iterations: fit.iterations,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::protocols::Shots;

    fn series(x: Vec<usize>, y: Vec<f64>) -> DecaySeries {
        let n = x.len();
        DecaySeries {
            x,
            y_mean: y,
            y_stderr: vec![0.0; n],
            raw: vec![vec![]; n],
            n_interleave: 0,
            seed: 0,
            shots: Shots::Exact,
        }
    }

    #[test]
    fn exact_model_is_recovered() {
        let x = vec![1, 5, 10, 20, 50, 100, 200, 365];
        let y = x.iter().map(|m| 0.48 * 0.993f64.powi(*m as i32) + 0.51).collect();
        let fit = fit_decay(&series(x, y)).unwrap();
        assert!((fit.alpha - 0.993).abs() < 1e-10);
        assert!((fit.a - 0.48).abs() < 1e-8 && (fit.b - 0.51).abs() < 1e-8);
    }

    #[test]
    fn constant_data_gives_unit_alpha() {
        let x = vec![1, 5, 10, 20, 50];
        let fit = fit_decay(&series(x, vec![1.0; 5])).unwrap();
        assert!(fit.alpha >= 1.0 - 1e-9);
    }

    #[test]
    fn too_few_points_attach_series() {
        let err = fit_decay(&series(vec![1, 2], vec![1.0, 0.9])).unwrap_err();
        match err {
            Error::Fit { series: Some(s), .. } => assert_eq!(s.x, vec![1, 2]),
            other => panic!("unexpected {other:?}"),
        }
    }
}
