use std::collections::BTreeMap;
use std::time::Instant;

use rand::Rng;
use serde_json::json;

use super::qaoa::simulators;
use super::{dat_file, stream, Artifacts, ExperimentConfig, InstanceRecord, MethodResult, ResultSet};
use crate::circuit::{Observable, PauliString, PauliTerm};
use crate::error::{CdrError, Result};
use crate::par;
use crate::regression::{analytic_depolarizing_coefficients, fit_linear, predict};
use crate::rng;
use crate::sim_exact::StateSpec;
use crate::sim_noisy::NoiseModel;
use crate::trainingset::{build_training_set, ChainConfig};
use crate::workloads::{build_qaoa_circuit, ising_observable, IsingSpec, QaoaParams};

/// Fits the linear ansatz under pure global depolarizing noise with exact
/// expectation values and compares against the closed-form coefficients.
pub(crate) fn run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let w = cfg.depolarizing.clone().unwrap_or_default();
    let spec = IsingSpec::new(w.qubits, 1.0)?;
    let mut terms = ising_observable(&spec).terms().to_vec();
    if w.offset != 0.0 {
        terms.push(PauliTerm {
            coeff: w.offset,
            paulis: PauliString::identity(w.qubits),
        });
    }
    let obs = Observable::new(terms)?;
    let dim = (1u64 << w.qubits) as f64;
    let trace_x = obs.normalized_trace() * dim;

    let mut cases = Vec::new();
    for i in 0..w.circuits {
        for &p in &w.p_errs {
            for &m in &w.ms {
                cases.push((i, p, m));
            }
        }
    }
    let results = par::try_map_indices(cases.len(), |j| {
        let (i, p, m) = cases[j];
        let started = Instant::now();
        let mut r = rng::stream(rng::derive_path(cfg.seed, &[stream::PARAMS, i as u64]));
        let params = QaoaParams {
            betas: (0..w.layers).map(|_| r.random_range(0.0..std::f64::consts::PI)).collect(),
            gammas: (0..w.layers).map(|_| r.random_range(0.0..std::f64::consts::PI)).collect(),
        };
        let circuit = build_qaoa_circuit(&spec, &params)?;
        let noisy_cfg = ExperimentConfig {
            noise: NoiseModel::global_depolarizing(p, m),
            shots: None,
            ..cfg.clone()
        };
        let sims = simulators(&noisy_cfg, obs.clone(), StateSpec::AllZero);
        let chain = ChainConfig {
            seed: rng::derive_path(cfg.seed, &[stream::CHAIN, j as u64]),
            ..cfg.chain.clone()
        };
        let ts = build_training_set(&circuit, &chain, &sims)?;
        let fit = fit_linear(&ts.observable_samples(&obs))?;
        let (a1, a2) = analytic_depolarizing_coefficients(p, m as u32, trace_x, dim)?;
        let exact = obs.combine(&sims.exact_terms(&circuit)?);
        let noisy = obs.combine(&sims.noisy_terms(&circuit, 0)?);
        let corrected = predict(&fit, noisy);
        let deviation = (fit.a1 - a1).abs().max((fit.a2 - a2).abs()).max((corrected.value - exact).abs());
        let mut methods = BTreeMap::new();
        methods.insert("noisy".to_string(), MethodResult::scalar(noisy, None, exact));
        methods.insert(
            "cdr".to_string(),
            MethodResult::scalar(corrected.value, Some(corrected.error_bar), exact),
        );
        let record = InstanceRecord {
            key: format!("{i}/p={p}/m={m}"),
            instance: i,
            n_non_clifford: Some(chain.n_non_clifford),
            exact: Some(exact),
            methods,
            shots_total: None,
            xi_mcmc: Some(ts.provenance.xi_mcmc as f64),
            acceptance_rate: Some(ts.provenance.acceptance_rate),
            details: json!({
                "p_err": p,
                "m": m,
                "fit": fit,
                "analytic": { "a1": a1, "a2": a2 },
                "max_deviation": deviation,
            }),
        };
        Ok::<_, CdrError>((record, vec![p, m as f64, i as f64, fit.a1, a1, fit.a2, a2, deviation], started.elapsed().as_secs_f64()))
    })?;

    let max_dev = results.iter().map(|(_, row, _)| row[7]).fold(0.0, f64::max);
    let timings = results.iter().map(|(r, _, t)| (r.key.clone(), *t)).collect();
    let rows: Vec<Vec<f64>> = results.iter().map(|(_, row, _)| row.clone()).collect();
    let records = results.into_iter().map(|(r, _, _)| r).collect();
    Ok(Artifacts {
        results: ResultSet::new(cfg, records, json!({ "max_deviation": max_dev, "tolerance": 1e-9, "passed": max_dev <= 1e-9 })),
        files: vec![(
            "depolarizing-like.dat".into(),
            dat_file("p_err m circuit a1_fit a1_analytic a2_fit a2_analytic max_deviation", rows),
        )],
        timings,
    })
}
