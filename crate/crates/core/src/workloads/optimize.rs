use rand::Rng;
use serde::{Deserialize, Serialize};

use super::ising::{build_qaoa_circuit, IsingSpec, QaoaParams};
use crate::error::Result;
use crate::rng;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct OptimizerConfig {
    pub max_evals: usize,
    pub restarts: usize,
    pub initial_step: f64,
    pub f_tol: f64,
    /// Random starting angles are drawn from `[0, init_range)`.
    pub init_range: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        OptimizerConfig {
            max_evals: 500,
            restarts: 10,
            initial_step: 0.25,
            f_tol: 1e-10,
            init_range: std::f64::consts::FRAC_PI_2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct NelderMeadResult {
    pub x: Vec<f64>,
    pub value: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Nelder–Mead simplex minimization with standard coefficients.
pub fn nelder_mead<F>(mut f: F, x0: &[f64], step: f64, max_evals: usize, f_tol: f64) -> Result<NelderMeadResult>
where
    F: FnMut(&[f64]) -> Result<f64>,
{
    let n = x0.len();
    let mut evals = 0;
    let mut eval = |x: &[f64], evals: &mut usize| -> Result<f64> {
        *evals += 1;
        f(x)
    };
    if n == 0 {
        let v = eval(x0, &mut evals)?;
        return Ok(NelderMeadResult {
            x: vec![],
            value: v,
            evaluations: evals,
            converged: true,
        });
    }
    let mut simplex: Vec<(Vec<f64>, f64)> = Vec::with_capacity(n + 1);
    simplex.push((x0.to_vec(), eval(x0, &mut evals)?));
    for i in 0..n {
        let mut x = x0.to_vec();
        x[i] += step;
        let v = eval(&x, &mut evals)?;
        simplex.push((x, v));
    }
    let mut converged = false;
    while evals < max_evals {
        simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
        let (best, worst) = (simplex[0].1, simplex[n].1);
        if (worst - best).abs() <= f_tol * (1.0 + best.abs()) {
            converged = true;
            break;
        }
        let centroid: Vec<f64> = (0..n).map(|d| simplex[..n].iter().map(|p| p.0[d]).sum::<f64>() / n as f64).collect();
        let along = |t: f64| -> Vec<f64> {
            centroid.iter().zip(&simplex[n].0).map(|(c, w)| c + t * (w - c)).collect()
        };
        let xr = along(-1.0);
        let fr = eval(&xr, &mut evals)?;
        if fr < simplex[0].1 {
            let xe = along(-2.0);
            let fe = eval(&xe, &mut evals)?;
            simplex[n] = if fe < fr { (xe, fe) } else { (xr, fr) };
        } else if fr < simplex[n - 1].1 {
            simplex[n] = (xr, fr);
        } else {
            let (xc, fc) = if fr < simplex[n].1 {
                let xc = along(-0.5);
                let fc = eval(&xc, &mut evals)?;
                (xc, fc)
            } else {
                let xc = along(0.5);
                let fc = eval(&xc, &mut evals)?;
                (xc, fc)
            };
            if fc < fr.min(simplex[n].1) {
                simplex[n] = (xc, fc);
            } else {
                let x_best = simplex[0].0.clone();
                for p in simplex.iter_mut().skip(1) {
                    p.0 = x_best.iter().zip(&p.0).map(|(b, x)| b + 0.5 * (x - b)).collect();
                    p.1 = eval(&p.0, &mut evals)?;
                }
            }
        }
    }
    simplex.sort_by(|a, b| a.1.total_cmp(&b.1));
    let (x, value) = simplex.swap_remove(0);
    Ok(NelderMeadResult {
        x,
        value,
        evaluations: evals,
        converged,
    })
}

/// A local minimum of the QAOA energy.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QaoaMinimum {
    pub params: QaoaParams,
    pub energy: f64,
    pub evaluations: usize,
    pub converged: bool,
}

/// Best of `cfg.restarts` simplex searches. The first start is `initial`
/// when given; the others are drawn from `seed`.
pub fn optimize_qaoa<F>(
    spec: &IsingSpec,
    p: usize,
    initial: Option<&QaoaParams>,
    mut energy: F,
    cfg: &OptimizerConfig,
    seed: u64,
) -> Result<QaoaMinimum>
where
    F: FnMut(&crate::circuit::Circuit) -> Result<f64>,
{
    let mut rng = rng::stream(seed);
    let mut best: Option<QaoaMinimum> = None;
    for r in 0..cfg.restarts.max(1) {
        let x0: Vec<f64> = match initial {
            Some(init) if r == 0 => {
                init.validate()?;
                init.to_vec()
            }
            _ => (0..2 * p).map(|_| rng.random::<f64>() * cfg.init_range).collect(),
        };
        let res = nelder_mead(
            |x| energy(&build_qaoa_circuit(spec, &QaoaParams::from_slice(x))?),
            &x0,
            cfg.initial_step,
            cfg.max_evals,
            cfg.f_tol,
        )?;
        if best.as_ref().is_none_or(|b| res.value < b.energy) {
            best = Some(QaoaMinimum {
                params: QaoaParams::from_slice(&res.x),
                energy: res.value,
                evaluations: res.evaluations,
                converged: res.converged,
            });
        }
    }
    Ok(best.expect("at least one restart"))
}
