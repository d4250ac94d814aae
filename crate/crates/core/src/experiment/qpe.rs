use std::collections::BTreeMap;
use std::f64::consts::TAU;
use std::fmt::Write as _;
use std::time::Instant;

use num_complex::Complex64;
use rand::Rng;
use serde_json::json;

use super::qaoa::simulators;
use super::{correct, dat_file, stream, Artifacts, ExperimentConfig, FitMode, InstanceRecord, MethodResult, QpeWorkload, ResultSet};
use crate::error::{CdrError, Result};
use crate::par;
use crate::rng;
use crate::sim_exact::StateSpec;
use crate::trainingset::{build_training_set, ChainConfig, Likelihood};
use crate::workloads::qpe::{
    ancilla_observable, binned_eigen_weights, build_qpe_circuits, qpe_relative_error, spectral_decomposition, QpeSpec,
};

pub(crate) fn spec_for(w: &QpeWorkload, input_angles: Vec<f64>) -> QpeSpec {
    let mut spec = QpeSpec::new(input_angles);
    spec.hamiltonian = w.hamiltonian.clone();
    if let Some(t) = &w.times {
        spec.times = t.clone();
    }
    if let Some(b) = &w.bin_centers {
        spec.bin_centers = b.clone();
    }
    if let Some(e) = w.bin_halfwidth {
        spec.bin_halfwidth = e;
    }
    if let Some(s) = w.bin_subdivisions {
        spec.bin_subdivisions = s;
    }
    spec
}

/// Rotations in each Hadamard-test circuit: two per system qubit for the
/// input state, two per Z-string term and one per identity term.
pub(crate) fn rotation_count(spec: &QpeSpec) -> usize {
    2 * spec.system_qubits()
        + spec
            .hamiltonian
            .terms()
            .iter()
            .map(|t| if t.paulis.is_identity() { 1 } else { 2 })
            .sum::<usize>()
}

struct Point {
    exact: f64,
    noisy: f64,
    cdr: f64,
    error_bar: f64,
    xi: usize,
    acceptance: f64,
    fallback: bool,
}

/// Projects `g` onto the unit disk.
fn clip_unit(g: Complex64) -> Complex64 {
    let r = g.norm();
    if r > 1.0 {
        g / r
    } else {
        g
    }
}

pub(crate) fn run(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let w = cfg.qpe.as_ref().expect("validated");
    let n = w.hamiltonian.width().unwrap_or(0);
    let specs: Vec<QpeSpec> = (0..w.inputs)
        .map(|s| {
            let mut r = rng::stream(rng::derive_path(cfg.seed, &[stream::INPUT, s as u64]));
            spec_for(w, (0..2 * n).map(|_| r.random_range(0.0..TAU)).collect())
        })
        .collect();
    let nt = specs[0].times.len();
    let sims = simulators(cfg, ancilla_observable(n + 1), StateSpec::AllZero);

    let started = Instant::now();
    let points = par::try_map_indices(w.inputs * nt * 2, |j| {
        let (s, ti, part) = (j / (2 * nt), (j / 2) % nt, j % 2);
        let path = [s as u64, ti as u64, part as u64];
        let (re, im) = build_qpe_circuits(&specs[s], specs[s].times[ti])?;
        let circuit = if part == 0 { re } else { im };
        let exact = sims.exact_terms(&circuit)?[0];
        let noisy_terms = sims.noisy_terms(&circuit, rng::derive_path(cfg.seed, &[&[stream::TARGET], &path[..]].concat()))?;
        let mut chain = ChainConfig {
            seed: rng::derive_path(cfg.seed, &[&[stream::CHAIN], &path[..]].concat()),
            ..cfg.chain.clone()
        };
        if let Likelihood::NoisyProximity { sigma, target: None } = chain.likelihood {
            chain.likelihood = Likelihood::NoisyProximity {
                sigma,
                target: Some(noisy_terms[0] * chain.x_scale),
            };
        }
        let ts = build_training_set(&circuit, &chain, &sims)?;
        let c = correct(&sims.observable, &ts, &noisy_terms, FitMode::PerTerm, false)?;
        Ok::<_, CdrError>(Point {
            exact,
            noisy: noisy_terms[0],
            cdr: c.value,
            error_bar: c.error_bar,
            xi: ts.provenance.xi_mcmc,
            acceptance: ts.provenance.acceptance_rate,
            fallback: c.fits.iter().any(|f| f.fallback.is_some()),
        })
    })?;
    let per_input_seconds = started.elapsed().as_secs_f64() / w.inputs as f64;

    let mut records = Vec::new();
    let mut files = Vec::new();
    let mut timings = Vec::new();
    let mut q_csv = String::from("input,bin_center,truth,exact_fit,noisy,cdr\n");
    let mut fig5b = Vec::new();
    let shots_per_circuit = match cfg.shots {
        Some(s) => Some(s.per_term(1)? * (cfg.chain.training_count as u64 + 1)),
        None => None,
    };
    for (s, spec) in specs.iter().enumerate() {
        let pts = &points[s * 2 * nt..(s + 1) * 2 * nt];
        let series = |f: &dyn Fn(&Point) -> f64| -> Vec<Complex64> {
            (0..nt).map(|ti| Complex64::new(f(&pts[2 * ti]), f(&pts[2 * ti + 1]))).collect()
        };
        let g_exact = series(&|p| p.exact);
        let g_noisy: Vec<Complex64> = series(&|p| p.noisy).into_iter().map(clip_unit).collect();
        let g_cdr: Vec<Complex64> = series(&|p| p.cdr).into_iter().map(clip_unit).collect();
        let truth = binned_eigen_weights(spec, &cfg.limits)?;
        let q_ref = spectral_decomposition(&g_exact, spec)?;
        let q_noisy = spectral_decomposition(&g_noisy, spec)?;
        let q_cdr = spectral_decomposition(&g_cdr, spec)?;
        let err_noisy = qpe_relative_error(&q_noisy, &q_ref)?;
        let err_cdr = qpe_relative_error(&q_cdr, &q_ref)?;
        let baseline = qpe_relative_error(&q_ref, &truth)?;
        fig5b.push(vec![s as f64, err_noisy, err_cdr, baseline]);

        let mut csv = String::from("t,exact_re,exact_im,noisy_re,noisy_im,cdr_re,cdr_im,cdr_re_error_bar,cdr_im_error_bar\n");
        for ti in 0..nt {
            let (a, b) = (&pts[2 * ti], &pts[2 * ti + 1]);
            writeln!(
                csv,
                "{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?},{:?}",
                spec.times[ti], a.exact, b.exact, a.noisy, b.noisy, g_cdr[ti].re, g_cdr[ti].im, a.error_bar, b.error_bar
            )
            .unwrap();
        }
        files.push((format!("series/input{s}.csv"), csv));
        for (j, c) in spec.bin_centers.iter().enumerate() {
            writeln!(q_csv, "{s},{c:?},{:?},{:?},{:?},{:?}", truth[j], q_ref[j], q_noisy[j], q_cdr[j]).unwrap();
        }
        if s == 0 {
            files.push((
                "fig5a-like.dat".into(),
                dat_file(
                    "t re_exact re_noisy re_cdr im_exact im_noisy im_cdr",
                    (0..nt).map(|ti| {
                        vec![
                            spec.times[ti],
                            g_exact[ti].re,
                            g_noisy[ti].re,
                            g_cdr[ti].re,
                            g_exact[ti].im,
                            g_noisy[ti].im,
                            g_cdr[ti].im,
                        ]
                    }),
                ),
            ));
        }

        let mut methods = BTreeMap::new();
        let l1 = |e: f64| MethodResult {
            value: None,
            error_bar: None,
            relative_error: e,
        };
        methods.insert("noisy".to_string(), l1(err_noisy));
        methods.insert("cdr".to_string(), l1(err_cdr));
        let mean = |f: &dyn Fn(&Point) -> f64| pts.iter().map(f).sum::<f64>() / pts.len() as f64;
        timings.push((s.to_string(), per_input_seconds));
        records.push(InstanceRecord {
            key: s.to_string(),
            instance: s,
            n_non_clifford: Some(cfg.chain.n_non_clifford),
            exact: None,
            methods,
            shots_total: shots_per_circuit.map(|c| c * 2 * nt as u64),
            xi_mcmc: Some(mean(&|p| p.xi as f64)),
            acceptance_rate: Some(mean(&|p| p.acceptance)),
            details: json!({
                "input_angles": spec.input_angles,
                "q_truth": truth,
                "q_exact_fit": q_ref,
                "q_noisy": q_noisy,
                "q_cdr": q_cdr,
                "estimator_baseline_error": baseline,
                "constant_fallbacks": pts.iter().filter(|p| p.fallback).count(),
                "max_abs_g_exact": g_exact.iter().map(|g| g.norm()).fold(0.0, f64::max),
            }),
        });
    }
    files.push(("q.csv".into(), q_csv));
    files.push((
        "fig5b-like.dat".into(),
        dat_file("input rel_noisy rel_cdr estimator_baseline", fig5b),
    ));
    let report = json!({
        "bin_centers": specs[0].bin_centers,
        "rotations_per_circuit": rotation_count(&specs[0]),
    });
    Ok(Artifacts {
        results: ResultSet::new(cfg, records, report),
        files,
        timings,
    })
}
