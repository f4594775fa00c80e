//! Linear against quadratic dependence of alpha_n on the repeat count,
//! decided with the small-sample corrected Akaike information criterion.
//!
//! Decoherence makes alpha_n fall linearly in `n` over the measured range,
//! a coherent overrotation quadratically. Three least-squares models are
//! compared:
//!
//! ```text
//! linear:    a n + b          (k = 2)
//! quadratic: a n^2 + b        (k = 2)
//! combined:  a n^2 + b n + c  (k = 3)
//! C = N ln(R / N) + 2k + 2k(k + 1) / (N - k - 1)
//! P_i = exp((C_min - C_i) / 2)
//! ```

use std::fmt;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fit::ols;
use crate::protocols::IrbResult;

/// Exact alpha of `n` repetitions of an overrotation by `epsilon`,
/// `(2 cos(n eps) + 1) / 3`.
pub fn analytic_alpha(epsilon: f64, n: usize) -> f64 {
    (2.0 * (n as f64 * epsilon).cos() + 1.0) / 3.0
}

/// The second-order expression `1 - n (2n - 1) eps^2 / 3`, kept for
/// comparison with [`analytic_alpha`]. It agrees with the exact value only
/// at `n <= 1`.
pub fn second_order_alpha(epsilon: f64, n: usize) -> f64 {
    let n = n as f64;
    1.0 - n * (2.0 * n - 1.0) * epsilon * epsilon / 3.0
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum ModelKind {
    Linear,
    Quadratic,
    Combined,
}

impl ModelKind {
    pub const ALL: [ModelKind; 3] = [ModelKind::Linear, ModelKind::Quadratic, ModelKind::Combined];

    pub fn num_params(self) -> usize {
        match self {
            ModelKind::Linear | ModelKind::Quadratic => 2,
            ModelKind::Combined => 3,
        }
    }

    fn row(self, n: f64) -> Vec<f64> {
        match self {
            ModelKind::Linear => vec![n, 1.0],
            ModelKind::Quadratic => vec![n * n, 1.0],
            ModelKind::Combined => vec![n * n, n, 1.0],
        }
    }

    pub fn verdict(self) -> Verdict {
        match self {
            ModelKind::Linear => Verdict::NonUnitary,
            ModelKind::Quadratic => Verdict::Unitary,
            ModelKind::Combined => Verdict::Mixed,
        }
    }
}

impl fmt::Display for ModelKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            ModelKind::Linear => "linear",
            ModelKind::Quadratic => "quadratic",
            ModelKind::Combined => "combined",
        })
    }
}

/// A model and its parameter count.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub kind: ModelKind,
    pub k: usize,
}

impl ModelSpec {
    pub fn new(kind: ModelKind) -> Self {
        Self {
            kind,
            k: kind.num_params(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(rename_all = "snake_case")]
pub enum Verdict {
    NonUnitary,
    Unitary,
    Mixed,
}

impl Verdict {
    /// Quadratic or combined model won: a coherent component was detected.
    pub fn has_coherent_part(self) -> bool {
        !matches!(self, Verdict::NonUnitary)
    }
}

impl fmt::Display for Verdict {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Verdict::NonUnitary => "non-unitary",
            Verdict::Unitary => "unitary",
            Verdict::Mixed => "mixed",
        })
    }
}

/// Fitted coefficients (highest power first) and residual sum of squares.
pub fn fit_model(
    n_values: &[f64],
    alpha_values: &[f64],
    spec: ModelSpec,
    weights: Option<&[f64]>,
) -> Result<(Vec<f64>, f64)> {
    if spec.k != spec.kind.num_params() {
        return Err(Error::invalid(format!(
            "{} model has {} parameters",
            spec.kind,
            spec.kind.num_params()
        )));
    }
    if n_values.len() != alpha_values.len() {
        return Err(Error::invalid("n and alpha lists differ in length"));
    }
    if n_values.len() < spec.k + 2 {
        return Err(Error::invalid(format!(
            "{} model needs at least {} points",
            spec.kind,
            spec.k + 2
        )));
    }
    if let Some(w) = weights {
        if w.len() != n_values.len() || w.iter().any(|v| !(v.is_finite() && *v > 0.0)) {
            return Err(Error::invalid("weights must be positive and match the data"));
        }
    }
    let rows: Vec<Vec<f64>> = n_values.iter().map(|n| spec.kind.row(*n)).collect();
    let x = DMatrix::from_fn(rows.len(), spec.k, |i, j| rows[i][j]);
    let y = DVector::from_column_slice(alpha_values);
    ols(&x, &y, weights)
}

/// Corrected AIC `N ln(R/N) + 2k + 2k(k+1)/(N-k-1)`.
pub fn aic(rss: f64, num_points: usize, k: usize) -> Result<f64> {
    if num_points <= k + 1 {
        return Err(Error::invalid(format!(
            "AIC correction needs more than {} points for {k} parameters",
            k + 1
        )));
    }
    if rss == 0.0 {
        return Err(Error::invalid(
            "residual sum of squares is exactly zero; add measurement jitter or report the exact fit",
        ));
    }
    if !(rss > 0.0) {
        return Err(Error::invalid("residual sum of squares must be positive"));
    }
    let n = num_points as f64;
    let k = k as f64;
    Ok(n * (rss / n).ln() + 2.0 * k + 2.0 * k * (k + 1.0) / (n - k - 1.0))
}

/// `exp((C_min - C_i) / 2)` for every model.
pub fn relative_probs(c_values: &[f64]) -> Vec<f64> {
    let c_min = c_values.iter().copied().fold(f64::INFINITY, f64::min);
    c_values.iter().map(|c| ((c_min - c) / 2.0).exp()).collect()
}

/// Classifier settings.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[cfg_attr(feature = "schema", derive(schemars::JsonSchema))]
#[serde(deny_unknown_fields, default)]
pub struct ClassifyOptions {
    /// Divide alpha_n by alpha_0 before fitting (requires n = 0).
    pub normalize: bool,
    /// Weight points by inverse squared CI half-width. Ignored when no
    /// half-widths are supplied.
    pub weighted: bool,
    /// Models within this AIC distance of the best count as tied; the one
    /// with fewer parameters wins.
    pub tie_tolerance: f64,
    /// Flag the result when the runner-up has at least this probability.
    pub inconclusive_above: f64,
}

impl Default for ClassifyOptions {
    fn default() -> Self {
        Self {
            normalize: false,
            weighted: true,
            tie_tolerance: 0.01,
            inconclusive_above: 0.5,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelEntry {
    pub kind: ModelKind,
    pub k: usize,
    pub params: Vec<f64>,
    pub rss: f64,
    pub aic: f64,
    pub probability: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelReport {
    pub models: Vec<ModelEntry>,
    pub winner: ModelKind,
    pub verdict: Verdict,
    /// The runner-up's relative probability reached the configured bound.
    pub inconclusive: bool,
    pub num_points: usize,
    pub n_values: Vec<usize>,
    /// Values the models were fitted to (after optional normalization).
    pub alphas: Vec<f64>,
    /// Whether the fits were CI-weighted.
    pub weighted: bool,
}

impl ModelReport {
    pub fn entry(&self, kind: ModelKind) -> &ModelEntry {
        self.models
            .iter()
            .find(|m| m.kind == kind)
            .expect("all models are fitted")
    }
}

/// Classifies `(n, alpha_n)` data with default options and no weights.
pub fn classify(points: &[(usize, f64)]) -> Result<ModelReport> {
    classify_with(points, None, &ClassifyOptions::default())
}

/// Classifies an IRB result, using its fit confidence intervals as weights
/// when `opts.weighted` is set.
pub fn classify_irb(result: &IrbResult, opts: &ClassifyOptions) -> Result<ModelReport> {
    classify_with(&result.alphas(), Some(&result.alpha_halfwidths()), opts)
}

/// Classifies `(n, alpha_n)` data. `halfwidths` (CI half-widths aligned
/// with `points`) are used only when `opts.weighted` is set.
pub fn classify_with(
    points: &[(usize, f64)],
    halfwidths: Option<&[f64]>,
    opts: &ClassifyOptions,
) -> Result<ModelReport> {
    let mut distinct: Vec<usize> = points.iter().map(|p| p.0).collect();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 5 {
        return Err(Error::invalid("classification needs at least 5 distinct n"));
    }
    let n_values: Vec<usize> = points.iter().map(|p| p.0).collect();
    let mut alphas: Vec<f64> = points.iter().map(|p| p.1).collect();
    if alphas.iter().any(|a| !a.is_finite()) {
        return Err(Error::invalid("alpha values must be finite"));
    }
    if opts.normalize {
        let a0 = points
            .iter()
            .find(|p| p.0 == 0)
            .map(|p| p.1)
            .ok_or_else(|| Error::invalid("normalization needs the n = 0 point"))?;
        alphas.iter_mut().for_each(|a| *a /= a0);
    }
    let weights: Option<Vec<f64>> = match (opts.weighted, halfwidths) {
        (true, Some(h)) => {
            if h.len() != points.len() {
                return Err(Error::invalid("half-widths must align with the points"));
            }
            if h.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
                return Err(Error::invalid("half-widths must be positive and finite"));
            }
            Some(h.iter().map(|w| 1.0 / (w * w)).collect())
        }
        _ => None,
    };
    let xs: Vec<f64> = n_values.iter().map(|n| *n as f64).collect();
    let m = xs.len();
    let mut models = Vec::with_capacity(3);
    for kind in ModelKind::ALL {
        let spec = ModelSpec::new(kind);
        let (params, rss) = fit_model(&xs, &alphas, spec, weights.as_deref())?;
        let c = aic(rss, m, spec.k)?;
        models.push(ModelEntry {
            kind,
            k: spec.k,
            params,
            rss,
            aic: c,
            probability: 0.0,
        });
    }
    let probs = relative_probs(&models.iter().map(|e| e.aic).collect::<Vec<_>>());
    for (e, p) in models.iter_mut().zip(&probs) {
        e.probability = *p;
    }
    let c_min = models.iter().map(|e| e.aic).fold(f64::INFINITY, f64::min);
    // Among near-ties prefer fewer parameters, then the earlier model.
    let winner = models
        .iter()
        .filter(|e| e.aic - c_min < opts.tie_tolerance)
        .min_by_key(|e| (e.k, e.kind))
        .map(|e| e.kind)
        .expect("at least one model attains the minimum");
    let runner_up = models
        .iter()
        .filter(|e| e.kind != winner)
        .map(|e| e.probability)
        .fold(0.0, f64::max);
    Ok(ModelReport {
        winner,
        verdict: winner.verdict(),
        inconclusive: runner_up >= opts.inconclusive_above,
        models,
        num_points: m,
        n_values,
        alphas,
        weighted: weights.is_some(),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    #[test]
    fn analytic_values() {
        assert_eq!(analytic_alpha(0.3, 0), 1.0);
        let e = PI / 64.0;
        assert!((analytic_alpha(e, 1) - 0.9991969).abs() < 1e-7);
        assert!((analytic_alpha(e, 4) - 0.987190).abs() < 5e-7);
        assert!((second_order_alpha(e, 4) - 0.977511).abs() < 5e-7);
        assert!((analytic_alpha(e, 1) - second_order_alpha(e, 1)).abs() < e.powi(4));
    }

    #[test]
    fn aic_hand_values() {
        assert!((aic(17.0, 17, 2).unwrap() - 4.857142857142857).abs() < 1e-12);
        assert!((aic(std::f64::consts::E * 17.0, 17, 2).unwrap() - 21.857142857142858).abs() < 1e-12);
        let penalty = aic(17.0, 17, 3).unwrap();
        assert!((penalty - (6.0 + 24.0 / 13.0)).abs() < 1e-12);
        assert!(aic(1.0, 3, 2).is_err());
        assert!(aic(0.0, 17, 2).is_err());
    }

    #[test]
    fn probabilities() {
        assert_eq!(relative_probs(&[3.0, 3.0, 3.0]), vec![1.0; 3]);
        let p = relative_probs(&[10.0, 12.0]);
        assert_eq!(p[0], 1.0);
        assert!((p[1] - (-1.0f64).exp()).abs() < 1e-15);
    }

    #[test]
    fn exact_line_and_nesting() {
        let n: Vec<f64> = (0..17).map(|v| v as f64).collect();
        let line: Vec<f64> = n.iter().map(|v| 1.0 - 3e-4 * v).collect();
        let (_, r) = fit_model(&n, &line, ModelSpec::new(ModelKind::Linear), None).unwrap();
        assert!(r < 1e-20);
        let curve: Vec<f64> = (0..17).map(|v| analytic_alpha(PI / 64.0, v)).collect();
        let rl = fit_model(&n, &curve, ModelSpec::new(ModelKind::Linear), None)
            .unwrap()
            .1;
        let rq = fit_model(&n, &curve, ModelSpec::new(ModelKind::Quadratic), None)
            .unwrap()
            .1;
        let rc = fit_model(&n, &curve, ModelSpec::new(ModelKind::Combined), None)
            .unwrap()
            .1;
        assert!(rq < rl && rc <= rq);
    }

    #[test]
    fn tie_prefers_fewer_parameters() {
        // Tiny deterministic wiggle so every model has a positive residual.
        let pts: Vec<(usize, f64)> = (0..17)
            .map(|n| (n, 1.0 - 2e-4 * n as f64 + 1e-7 * ((n * 7 % 5) as f64 - 2.0)))
            .collect();
        let rep = classify(&pts).unwrap();
        assert_eq!(rep.verdict, Verdict::NonUnitary);
        assert_eq!(rep.entry(rep.winner).probability, 1.0);
    }
}
