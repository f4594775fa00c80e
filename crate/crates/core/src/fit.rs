//! Small dense least-squares solvers shared by the decay, calibration and
//! model-selection fits.

use nalgebra::{DMatrix, DVector};
use statrs::distribution::{ContinuousCDF, StudentsT};

use crate::error::{Error, Result};

/// Outcome of a nonlinear least-squares fit.
#[derive(Debug, Clone)]
pub(crate) struct LmFit {
    pub params: Vec<f64>,
    pub residuals: Vec<f64>,
    pub rss: f64,
    /// `(J^T J)^+ * rss / dof`; zero when the fit is exact.
    pub covariance: DMatrix<f64>,
    pub iterations: usize,
}

impl LmFit {
    pub fn stderr(&self, i: usize) -> f64 {
        self.covariance[(i, i)].max(0.0).sqrt()
    }
}

#[derive(Debug, Clone)]
pub(crate) struct LmOptions {
    pub max_iter: usize,
    pub bounds: Vec<(f64, f64)>,
    pub xtol: f64,
    pub ftol: f64,
}

impl LmOptions {
    pub fn unbounded(n: usize) -> Self {
        Self {
            max_iter: 500,
            bounds: vec![(f64::NEG_INFINITY, f64::INFINITY); n],
            xtol: 1e-11,
            ftol: 1e-13,
        }
    }
}

/// Levenberg-Marquardt on `y ~ model(p, x)`. `model` returns the value and
/// its gradient with respect to `p`. Parameters are clamped to `bounds`
/// after every step.
pub(crate) fn levenberg_marquardt<F>(model: F, xs: &[f64], ys: &[f64], p0: &[f64], opts: &LmOptions) -> Result<LmFit>
where
    F: Fn(&[f64], f64) -> (f64, Vec<f64>),
{
    let m = xs.len();
    let k = p0.len();
    if m < k {
        return Err(Error::fit(format!("{m} points cannot determine {k} parameters")));
    }
    let clamp = |p: &mut [f64]| {
        for (v, (lo, hi)) in p.iter_mut().zip(&opts.bounds) {
            *v = v.clamp(*lo, *hi);
        }
    };
    let eval = |p: &[f64]| -> (DVector<f64>, DMatrix<f64>) {
        let mut r = DVector::zeros(m);
        let mut j = DMatrix::zeros(m, k);
        for (i, (&x, &y)) in xs.iter().zip(ys).enumerate() {
            let (v, g) = model(p, x);
            r[i] = y - v;
            for (c, gc) in g.iter().enumerate() {
                j[(i, c)] = *gc;
            }
        }
        (r, j)
    };
    let mut p = p0.to_vec();
    clamp(&mut p);
    let (mut r, mut j) = eval(&p);
    let mut rss = r.norm_squared();
    if !rss.is_finite() {
        return Err(Error::fit("model is not finite at the starting point"));
    }
    let mut mu = 1e-3;
    for iterations in 1..=opts.max_iter {
        let mut jtj = j.transpose() * &j;
        let mut jtr = j.transpose() * &r;
        // Parameters pinned at a bound with the gradient pointing outward
        // are held fixed for this iteration.
        for d in 0..k {
            let (lo, hi) = opts.bounds[d];
            if (p[d] <= lo && jtr[d] < 0.0) || (p[d] >= hi && jtr[d] > 0.0) {
                jtj.row_mut(d).fill(0.0);
                jtj.column_mut(d).fill(0.0);
                jtj[(d, d)] = 1.0;
                jtr[d] = 0.0;
            }
        }
        let diag_scale = jtj.diagonal().map(|d| d.max(1e-30));
        let mut improved = false;
        for _ in 0..40 {
            let mut a = jtj.clone();
            for d in 0..k {
                a[(d, d)] += mu * diag_scale[d];
            }
            let Some(step) = a.lu().solve(&jtr) else {
                mu *= 10.0;
                continue;
            };
            let mut trial: Vec<f64> = p.iter().zip(step.iter()).map(|(a, b)| a + b).collect();
            clamp(&mut trial);
            let (rt, jt) = eval(&trial);
            let rss_t = rt.norm_squared();
            if rss_t.is_finite() && rss_t <= rss {
                let dp = trial
                    .iter()
                    .zip(&p)
                    .map(|(a, b)| (a - b).abs() / (b.abs() + 1e-12))
                    .fold(0.0, f64::max);
                let df = rss - rss_t;
                p = trial;
                r = rt;
                j = jt;
                let prev = rss;
                rss = rss_t;
                mu = (mu / 3.0).max(1e-15);
                improved = true;
                if dp < opts.xtol || df <= opts.ftol * prev.max(1e-300) {
                    return finish(p, r, rss, &j, m, iterations);
                }
                break;
            }
            mu *= 4.0;
        }
        if !improved {
            // No descent direction left: at a minimum up to rounding.
            return finish(p, r, rss, &j, m, iterations);
        }
    }
    Err(Error::fit(format!(
        "no convergence after {} iterations (rss {rss:.3e})",
        opts.max_iter
    )))
}

fn finish(p: Vec<f64>, r: DVector<f64>, rss: f64, j: &DMatrix<f64>, m: usize, iterations: usize) -> Result<LmFit> {
    let k = p.len();
    let dof = m.saturating_sub(k).max(1) as f64;
    let jtj = j.transpose() * j;
    let inv = pseudo_inverse(&jtj);
    Ok(LmFit {
        params: p,
        residuals: r.iter().copied().collect(),
        rss,
        covariance: inv * (rss / dof),
        iterations,
    })
}

pub(crate) fn pseudo_inverse(a: &DMatrix<f64>) -> DMatrix<f64> {
    let svd = a.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let tol = smax * 1e-12 * a.nrows().max(1) as f64;
    svd.pseudo_inverse(tol.max(f64::MIN_POSITIVE))
        .unwrap_or_else(|_| DMatrix::zeros(a.ncols(), a.nrows()))
}

/// Two-sided 95% Student-t quantile for `dof` degrees of freedom.
pub(crate) fn t95(dof: usize) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, dof.max(1) as f64).expect("valid Student-t");
    dist.inverse_cdf(0.975)
}

/// Ordinary least squares for `y ~ X b`. Fails on a rank-deficient design.
pub(crate) fn ols(design: &DMatrix<f64>, y: &DVector<f64>, weights: Option<&[f64]>) -> Result<(Vec<f64>, f64)> {
    let (m, k) = design.shape();
    let (x, yw) = match weights {
        Some(w) => {
            let s: Vec<f64> = w.iter().map(|v| v.sqrt()).collect();
            let x = DMatrix::from_fn(m, k, |i, j| design[(i, j)] * s[i]);
            let yw = DVector::from_fn(m, |i, _| y[i] * s[i]);
            (x, yw)
        }
        None => (design.clone(), y.clone()),
    };
    let svd = x.clone().svd(true, true);
    let smax = svd.singular_values.iter().copied().fold(0.0, f64::max);
    let smin = svd.singular_values.iter().copied().fold(f64::INFINITY, f64::min);
    if !(smax > 0.0) || smin <= smax * 1e-12 {
        return Err(Error::fit("rank-deficient design matrix"));
    }
    let b = svd
        .solve(&yw, 0.0)
        .map_err(|e| Error::fit(format!("least-squares solve failed: {e}")))?;
    let resid = &yw - &x * &b;
    Ok((b.iter().copied().collect(), resid.norm_squared()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn recovers_exponential() {
        let xs: Vec<f64> = (0..20).map(|i| i as f64 * 3.0).collect();
        let ys: Vec<f64> = xs.iter().map(|x| 0.45 * 0.97f64.powf(*x) + 0.52).collect();
        let model = |p: &[f64], x: f64| {
            let e = p[1].powf(x);
            (p[0] * e + p[2], vec![e, p[0] * x * p[1].powf(x - 1.0), 1.0])
        };
        let fit = levenberg_marquardt(model, &xs, &ys, &[0.5, 0.9, 0.5], &LmOptions::unbounded(3)).unwrap();
        assert!((fit.params[1] - 0.97).abs() < 1e-10);
        assert!(fit.rss < 1e-20);
    }

    #[test]
    fn ols_line_and_rank_deficiency() {
        let x = DMatrix::from_fn(5, 2, |i, j| if j == 0 { i as f64 } else { 1.0 });
        let y = DVector::from_fn(5, |i, _| 2.0 * i as f64 - 1.0);
        let (b, r) = ols(&x, &y, None).unwrap();
        assert!((b[0] - 2.0).abs() < 1e-12 && (b[1] + 1.0).abs() < 1e-12 && r < 1e-20);
        let bad = DMatrix::from_fn(5, 2, |_, _| 1.0);
        assert!(ols(&bad, &y, None).is_err());
    }

    #[test]
    fn t_quantile() {
        assert!((t95(10) - 2.228139).abs() < 1e-5);
    }
}
