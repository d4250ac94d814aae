//! Fitting noisy-to-exact maps and zero-noise extrapolation.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{CdrError, Result};

/// One training pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainingSample {
    pub x_noisy: f64,
    pub x_exact: f64,
}

impl TrainingSample {
    pub fn new(x_noisy: f64, x_exact: f64) -> Self {
        TrainingSample { x_noisy, x_exact }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Ansatz {
    Linear,
    Constant,
}

/// Fitted correction `x ↦ a1·x + a2` (or the constant `a1`).
///
/// `error_bar` is three residual standard deviations, `3·√(C/(L−1))`;
/// it is NaN for a single-sample fit.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub ansatz: Ansatz,
    pub a1: f64,
    pub a2: f64,
    #[serde(rename = "C")]
    pub cost: f64,
    #[serde(rename = "L")]
    pub samples: usize,
    pub stddev: f64,
    pub error_bar: f64,
}

impl FitResult {
    fn new(ansatz: Ansatz, a1: f64, a2: f64, samples: &[TrainingSample]) -> Self {
        let mut fit = FitResult {
            ansatz,
            a1,
            a2,
            cost: 0.0,
            samples: samples.len(),
            stddev: 0.0,
            error_bar: 0.0,
        };
        fit.cost = samples.iter().map(|s| (s.x_exact - fit.apply(s.x_noisy)).powi(2)).sum();
        fit.stddev = (fit.cost / (samples.len() as f64 - 1.0)).sqrt();
        fit.error_bar = 3.0 * fit.stddev;
        fit
    }

    fn apply(&self, x_noisy: f64) -> f64 {
        match self.ansatz {
            Ansatz::Linear => self.a1 * x_noisy + self.a2,
            Ansatz::Constant => self.a1,
        }
    }
}

fn check_samples(samples: &[TrainingSample], min: usize) -> Result<()> {
    if samples.len() < min {
        return Err(CdrError::Invalid(format!(
            "fit needs at least {min} samples, got {}",
            samples.len()
        )));
    }
    if samples.iter().any(|s| !(s.x_noisy.is_finite() && s.x_exact.is_finite())) {
        return Err(CdrError::Invalid("training samples must be finite".into()));
    }
    Ok(())
}

/// Ordinary least squares for `x_exact ≈ a1·x_noisy + a2`.
pub fn fit_linear(samples: &[TrainingSample]) -> Result<FitResult> {
    check_samples(samples, 2)?;
    let n = samples.len() as f64;
    let mx = samples.iter().map(|s| s.x_noisy).sum::<f64>() / n;
    let my = samples.iter().map(|s| s.x_exact).sum::<f64>() / n;
    let (mut sxx, mut sxy) = (0.0, 0.0);
    for s in samples {
        let dx = s.x_noisy - mx;
        sxx += dx * dx;
        sxy += dx * (s.x_exact - my);
    }
    let scale = samples.iter().map(|s| s.x_noisy.abs()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
    if sxx <= n * (f64::EPSILON * scale).powi(2) * 16.0 {
        return Err(CdrError::Degenerate(
            "all noisy training values are equal; use the constant ansatz".into(),
        ));
    }
    let a1 = sxy / sxx;
    Ok(FitResult::new(Ansatz::Linear, a1, my - a1 * mx, samples))
}

/// Least-squares constant: the mean of the exact values.
pub fn fit_constant(samples: &[TrainingSample]) -> Result<FitResult> {
    check_samples(samples, 1)?;
    // shifted mean: exact when all values coincide
    let y0 = samples[0].x_exact;
    let mean = y0 + samples.iter().map(|s| s.x_exact - y0).sum::<f64>() / samples.len() as f64;
    Ok(FitResult::new(Ansatz::Constant, mean, 0.0, samples))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub value: f64,
    pub error_bar: f64,
}

pub fn predict(fit: &FitResult, x_noisy: f64) -> Prediction {
    Prediction {
        value: fit.apply(x_noisy),
        error_bar: fit.error_bar,
    }
}

/// Exact correction coefficients when the only noise is `m` applications of
/// the global depolarizing channel with probability `p_err`.
pub fn analytic_depolarizing_coefficients(p_err: f64, m: u32, trace_x: f64, dim: f64) -> Result<(f64, f64)> {
    if !(0.0..=1.0).contains(&p_err) {
        return Err(CdrError::Domain(format!("p_err = {p_err} is outside [0, 1)")));
    }
    if m == 0 {
        return Ok((1.0, 0.0));
    }
    if p_err == 1.0 {
        return Err(CdrError::Domain("p_err = 1 erases the signal; the correction is singular".into()));
    }
    let f = (1.0 - p_err).powi(m as i32);
    Ok((1.0 / f, -(1.0 - f) * trace_x / (dim * f)))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ZneKind {
    Linear,
    Quadratic,
    Cubic,
    Exponential,
}

impl ZneKind {
    pub const ALL: [ZneKind; 4] = [ZneKind::Linear, ZneKind::Quadratic, ZneKind::Cubic, ZneKind::Exponential];

    pub fn name(self) -> &'static str {
        match self {
            ZneKind::Linear => "linear",
            ZneKind::Quadratic => "quadratic",
            ZneKind::Cubic => "cubic",
            ZneKind::Exponential => "exponential",
        }
    }

    fn min_points(self) -> usize {
        match self {
            ZneKind::Linear => 2,
            ZneKind::Quadratic => 3,
            ZneKind::Cubic => 4,
            ZneKind::Exponential => 3,
        }
    }
}

/// Extrapolation to zero noise.
///
/// `parameters` are polynomial coefficients from the constant term up, or
/// `(a, b, k)` for `a + b·e^{−kc}`. `uncertainty` is the covariance-based
/// standard error of `value_at_zero`, absent when the fit has no residual
/// degrees of freedom. `fallback` explains why an exponential fit was
/// replaced by a quadratic one.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ZneFit {
    pub kind: ZneKind,
    pub points: Vec<(f64, f64)>,
    pub value_at_zero: f64,
    pub uncertainty: Option<f64>,
    pub parameters: Vec<f64>,
    pub residual_cost: f64,
    pub fallback: Option<String>,
}

fn check_points(points: &[(f64, f64)], kind: ZneKind) -> Result<()> {
    if points.iter().any(|(c, v)| !(c.is_finite() && v.is_finite())) {
        return Err(CdrError::Invalid("extrapolation points must be finite".into()));
    }
    let mut cs: Vec<f64> = points.iter().map(|p| p.0).collect();
    cs.sort_by(f64::total_cmp);
    if cs.windows(2).any(|w| w[0] == w[1]) {
        return Err(CdrError::Invalid("noise scale factors must be distinct".into()));
    }
    if points.len() < kind.min_points() {
        return Err(CdrError::Invalid(format!(
            "{kind:?} extrapolation needs at least {} points, got {}",
            kind.min_points(),
            points.len()
        )));
    }
    Ok(())
}

pub fn zne_extrapolate(points: &[(f64, f64)], kind: ZneKind) -> Result<ZneFit> {
    check_points(points, kind)?;
    match kind {
        ZneKind::Linear => polynomial_fit(points, 1, kind),
        ZneKind::Quadratic => polynomial_fit(points, 2, kind),
        ZneKind::Cubic => polynomial_fit(points, 3, kind),
        ZneKind::Exponential => match exponential_fit(points) {
            Ok(fit) => Ok(fit),
            Err(CdrError::Convergence(reason)) => {
                let mut fit = polynomial_fit(points, 2, ZneKind::Quadratic)?;
                fit.fallback = Some(reason);
                Ok(fit)
            }
            Err(e) => Err(e),
        },
    }
}

/// All four fits side by side; kinds without enough points are skipped.
pub fn zne_all(points: &[(f64, f64)]) -> Result<Vec<ZneFit>> {
    ZneKind::ALL
        .iter()
        .filter(|k| points.len() >= k.min_points())
        .map(|&k| zne_extrapolate(points, k))
        .collect()
}

fn polynomial_fit(points: &[(f64, f64)], degree: usize, kind: ZneKind) -> Result<ZneFit> {
    let n = points.len();
    let v = DMatrix::from_fn(n, degree + 1, |i, j| points[i].0.powi(j as i32));
    let y = DVector::from_iterator(n, points.iter().map(|p| p.1));
    let svd = v.clone().svd(true, true);
    let coeffs = svd
        .solve(&y, 1e-13 * svd.singular_values.max())
        .map_err(|e| CdrError::Degenerate(e.to_string()))?;
    let residual = &y - &v * &coeffs;
    let cost = residual.norm_squared();
    let dof = n - degree - 1;
    let uncertainty = if dof > 0 {
        let s2 = cost / dof as f64;
        (v.transpose() * &v).try_inverse().map(|inv| (s2 * inv[(0, 0)]).sqrt())
    } else {
        None
    };
    Ok(ZneFit {
        kind,
        points: points.to_vec(),
        value_at_zero: coeffs[0],
        uncertainty,
        parameters: coeffs.iter().copied().collect(),
        residual_cost: cost,
        fallback: None,
    })
}

/// Best `(a, b)` and residual cost of `a + b·e^{−kc}` at fixed `k`.
fn profile(points: &[(f64, f64)], k: f64) -> (f64, f64, f64) {
    let n = points.len() as f64;
    let e: Vec<f64> = points.iter().map(|p| (-k * p.0).exp()).collect();
    let me = e.iter().sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let (mut see, mut sey) = (0.0, 0.0);
    for (ei, p) in e.iter().zip(points) {
        see += (ei - me).powi(2);
        sey += (ei - me) * (p.1 - my);
    }
    if see == 0.0 {
        return (my, 0.0, points.iter().map(|p| (p.1 - my).powi(2)).sum());
    }
    let b = sey / see;
    let a = my - b * me;
    let cost = points.iter().zip(&e).map(|(p, ei)| (p.1 - a - b * ei).powi(2)).sum();
    (a, b, cost)
}

fn initial_rate(points: &[(f64, f64)]) -> Option<f64> {
    let mut p = points.to_vec();
    p.sort_by(|a, b| a.0.total_cmp(&b.0));
    let slopes: Vec<(f64, f64)> = p
        .windows(2)
        .map(|w| ((w[0].0 + w[1].0) / 2.0, (w[1].1 - w[0].1) / (w[1].0 - w[0].0)))
        .collect();
    let ks: Vec<f64> = slopes
        .windows(2)
        .filter(|w| w[0].1 != 0.0 && w[1].1 / w[0].1 > 0.0)
        .map(|w| -(w[1].1 / w[0].1).ln() / (w[1].0 - w[0].0))
        .filter(|k| k.is_finite() && *k > 0.0)
        .collect();
    (!ks.is_empty()).then(|| ks.iter().sum::<f64>() / ks.len() as f64)
}

fn exponential_fit(points: &[(f64, f64)]) -> Result<ZneFit> {
    let span = points.iter().map(|p| p.0).fold(f64::NEG_INFINITY, f64::max)
        - points.iter().map(|p| p.0).fold(f64::INFINITY, f64::min);
    let k_min = 1e-6 / span;
    let k_max = 200.0 / span;
    // scan in log k, seeded by the finite-difference estimate
    let mut grid: Vec<f64> = (0..=200)
        .map(|i| (k_min.ln() + (k_max / k_min).ln() * i as f64 / 200.0).exp())
        .collect();
    if let Some(k0) = initial_rate(points) {
        grid.push(k0.clamp(k_min, k_max));
        grid.sort_by(f64::total_cmp);
    }
    let costs: Vec<f64> = grid.iter().map(|&k| profile(points, k).2).collect();
    let best = (0..grid.len()).min_by(|&i, &j| costs[i].total_cmp(&costs[j])).expect("non-empty grid");
    if best == 0 || best == grid.len() - 1 {
        return Err(CdrError::Convergence(format!(
            "exponential decay rate runs to the edge of [{k_min:.3e}, {k_max:.3e}] (residual {:.3e})",
            costs[best]
        )));
    }
    // golden-section refinement in log k
    let (mut lo, mut hi) = (grid[best - 1].ln(), grid[best + 1].ln());
    let g = (5f64.sqrt() - 1.0) / 2.0;
    let f = |t: f64| profile(points, t.exp()).2;
    let (mut x1, mut x2) = (hi - g * (hi - lo), lo + g * (hi - lo));
    let (mut f1, mut f2) = (f(x1), f(x2));
    for _ in 0..200 {
        if hi - lo < 1e-15 {
            break;
        }
        if f1 < f2 {
            hi = x2;
            x2 = x1;
            f2 = f1;
            x1 = hi - g * (hi - lo);
            f1 = f(x1);
        } else {
            lo = x1;
            x1 = x2;
            f1 = f2;
            x2 = lo + g * (hi - lo);
            f2 = f(x2);
        }
    }
    let mut k = ((lo + hi) / 2.0).exp();
    let (mut a, mut b, mut cost) = profile(points, k);
    // Gauss–Newton polish on (a, b, k)
    for _ in 0..50 {
        let j = DMatrix::from_fn(points.len(), 3, |i, col| {
            let e = (-k * points[i].0).exp();
            match col {
                0 => 1.0,
                1 => e,
                _ => -b * points[i].0 * e,
            }
        });
        let r = DVector::from_iterator(points.len(), points.iter().map(|p| p.1 - a - b * (-k * p.0).exp()));
        let Some(step) = (j.transpose() * &j).try_inverse().map(|inv| inv * j.transpose() * r) else {
            break;
        };
        let (a2, b2, k2) = (a + step[0], b + step[1], k + step[2]);
        let c2: f64 = points.iter().map(|p| (p.1 - a2 - b2 * (-k2 * p.0).exp()).powi(2)).sum();
        if !(c2 < cost) || k2 <= 0.0 {
            break;
        }
        (a, b, k, cost) = (a2, b2, k2, c2);
    }
    if !(a.is_finite() && b.is_finite() && k.is_finite()) {
        return Err(CdrError::Convergence("exponential fit produced non-finite parameters".into()));
    }
    let dof = points.len() - 3;
    let uncertainty = if dof > 0 {
        let j = DMatrix::from_fn(points.len(), 3, |i, col| {
            let e = (-k * points[i].0).exp();
            match col {
                0 => 1.0,
                1 => e,
                _ => -b * points[i].0 * e,
            }
        });
        (j.transpose() * &j).try_inverse().map(|inv| {
            let s2 = cost / dof as f64;
            (s2 * (inv[(0, 0)] + inv[(1, 1)] + 2.0 * inv[(0, 1)])).max(0.0).sqrt()
        })
    } else {
        None
    };
    Ok(ZneFit {
        kind: ZneKind::Exponential,
        points: points.to_vec(),
        value_at_zero: a + b,
        uncertainty,
        parameters: vec![a, b, k],
        residual_cost: cost,
        fallback: None,
    })
}
