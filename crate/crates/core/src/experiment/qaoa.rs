use std::collections::BTreeMap;
use std::time::Instant;

use serde_json::json;

use super::{correct, dat_file, stream, Artifacts, ExperimentConfig, InstanceRecord, MethodResult, QaoaWorkload, ResultSet};
use crate::circuit::{Circuit, Observable};
use crate::error::{CdrError, Result};
use crate::par;
use crate::regression::{zne_extrapolate, ZneFit, ZneKind};
use crate::rng;
use crate::sim_exact::StateSpec;
use crate::sim_noisy::scale_noise;
use crate::trainingset::{
    autocorrelation, autocorrelation_length, build_training_set, initial_projection, mcmc_step, ChainConfig,
    Likelihood, Projector, Simulators, Source,
};
use crate::workloads::{build_qaoa_circuit, ising_observable, optimize_qaoa, IsingSpec, QaoaMinimum};

pub(crate) fn refinement_values(w: &QaoaWorkload, chain: &ChainConfig) -> Vec<usize> {
    if w.refinement.is_empty() {
        vec![chain.n_non_clifford]
    } else {
        w.refinement.clone()
    }
}

pub(crate) fn simulators(cfg: &ExperimentConfig, obs: Observable, init: StateSpec) -> Simulators {
    Simulators {
        noisy_backend: cfg.noisy_backend,
        limits: cfg.limits,
        shots: cfg.shots,
        ..Simulators::new(obs, init, cfg.noise)
    }
}

/// An optimized QAOA circuit with its exact and noisy energies.
struct Instance {
    minimum: QaoaMinimum,
    circuit: Circuit,
    exact: f64,
    noisy_terms: Vec<f64>,
    noisy: f64,
    /// Requested extrapolation and the fit that answered it (an exponential
    /// request may fall back to a quadratic fit).
    zne: Vec<(ZneKind, ZneFit)>,
    zne_errors: BTreeMap<String, String>,
    seconds: f64,
}

fn prepare(cfg: &ExperimentConfig, w: &QaoaWorkload, i: usize, sims: &Simulators, with_zne: bool) -> Result<Instance> {
    let started = Instant::now();
    let spec = IsingSpec::new(w.qubits, w.g)?;
    let obs = &sims.observable;
    let minimum = optimize_qaoa(
        &spec,
        w.layers,
        None,
        |c| Ok(obs.combine(&sims.exact_terms(c)?)),
        &w.optimizer,
        rng::derive_path(cfg.seed, &[stream::OPTIMIZE, i as u64]),
    )?;
    let circuit = build_qaoa_circuit(&spec, &minimum.params)?;
    let exact = obs.combine(&sims.exact_terms(&circuit)?);
    let noisy_terms = sims.noisy_terms(&circuit, rng::derive_path(cfg.seed, &[stream::TARGET, i as u64]))?;
    let noisy = obs.combine(&noisy_terms);
    let (zne, zne_errors) = if with_zne {
        zne_fits(cfg, i, &circuit, sims)?
    } else {
        (vec![], BTreeMap::new())
    };
    Ok(Instance {
        minimum,
        circuit,
        exact,
        noisy_terms,
        noisy,
        zne,
        zne_errors,
        seconds: started.elapsed().as_secs_f64(),
    })
}

/// Noisy energies at every scale factor and all extrapolations. Failed fits
/// are reported by name instead of aborting the run.
fn zne_fits(
    cfg: &ExperimentConfig,
    i: usize,
    circuit: &Circuit,
    sims: &Simulators,
) -> Result<(Vec<(ZneKind, ZneFit)>, BTreeMap<String, String>)> {
    let scales = cfg.zne_scales()?;
    let mut points = Vec::with_capacity(scales.len());
    for (k, c) in scales.iter().enumerate() {
        let scaled = Simulators {
            noise: scale_noise(&cfg.noise, *c)?,
            ..sims.clone()
        };
        let terms = scaled.noisy_terms(circuit, rng::derive_path(cfg.seed, &[stream::ZNE, i as u64, k as u64]))?;
        points.push((*c, sims.observable.combine(&terms)));
    }
    let mut fits = Vec::new();
    let mut errors = BTreeMap::new();
    for kind in ZneKind::ALL {
        match zne_extrapolate(&points, kind) {
            Ok(f) => fits.push((kind, f)),
            Err(e) => {
                errors.insert(kind.name().to_string(), e.to_string());
            }
        }
    }
    Ok((fits, errors))
}

fn zne_methods(inst: &Instance, methods: &mut BTreeMap<String, MethodResult>) {
    for (kind, f) in &inst.zne {
        methods.insert(
            format!("zne-{}", kind.name()),
            MethodResult::scalar(f.value_at_zero, f.uncertainty, inst.exact),
        );
    }
}

fn zne_details(inst: &Instance) -> serde_json::Value {
    inst.zne
        .iter()
        .map(|(kind, f)| (kind.name().to_string(), serde_json::to_value(f).expect("fit serializes")))
        .collect::<serde_json::Map<_, _>>()
        .into()
}

fn record_key(i: usize, n: usize, sweep: bool) -> String {
    if sweep {
        format!("{i}/N={n}")
    } else {
        i.to_string()
    }
}

fn prepare_all(cfg: &ExperimentConfig, w: &QaoaWorkload, with_zne: bool) -> Result<(Simulators, Vec<Instance>)> {
    let spec = IsingSpec::new(w.qubits, w.g)?;
    let sims = simulators(cfg, ising_observable(&spec), StateSpec::AllZero);
    let instances = par::try_map_indices(w.instances, |i| prepare(cfg, w, i, &sims, with_zne))?;
    Ok((sims, instances))
}

fn chain_for(cfg: &ExperimentConfig, w: &QaoaWorkload, i: usize, n: usize) -> ChainConfig {
    ChainConfig {
        n_non_clifford: n,
        seed: rng::derive_path(cfg.seed, &[stream::CHAIN, i as u64, n as u64]),
        // the likelihood sees energy per qubit
        x_scale: cfg.chain.x_scale / w.qubits as f64,
        ..cfg.chain.clone()
    }
}

pub(crate) fn run_cdr(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let w = cfg.require_qaoa()?;
    let ns = refinement_values(w, &cfg.chain);
    let sweep = !w.refinement.is_empty();
    let (sims, instances) = prepare_all(cfg, w, cfg.zne.is_some())?;
    let obs = &sims.observable;
    let terms = obs.len() as u64;

    let jobs = par::try_map_indices(instances.len() * ns.len(), |j| {
        let (i, n) = (j / ns.len(), ns[j % ns.len()]);
        let inst = &instances[i];
        let started = Instant::now();
        let chain = chain_for(cfg, w, i, n);
        let ts = build_training_set(&inst.circuit, &chain, &sims)?;
        let cdr = correct(obs, &ts, &inst.noisy_terms, w.fit, false)?;
        let mut methods = BTreeMap::new();
        methods.insert("noisy".to_string(), MethodResult::scalar(inst.noisy, None, inst.exact));
        methods.insert(
            "cdr".to_string(),
            MethodResult::scalar(cdr.value, Some(cdr.error_bar), inst.exact),
        );
        let constant = if w.constant_ansatz {
            let c = correct(obs, &ts, &inst.noisy_terms, w.fit, true)?;
            methods.insert(
                "constant".to_string(),
                MethodResult::scalar(c.value, Some(c.error_bar), inst.exact),
            );
            Some(c)
        } else {
            None
        };
        zne_methods(inst, &mut methods);
        let shots_total = match cfg.shots {
            Some(s) => Some(s.per_term(obs.len())? * terms * (chain.training_count as u64 + 1)),
            None => None,
        };
        let record = InstanceRecord {
            key: record_key(i, n, sweep),
            instance: i,
            n_non_clifford: Some(n),
            exact: Some(inst.exact),
            methods,
            shots_total,
            xi_mcmc: Some(ts.provenance.xi_mcmc as f64),
            acceptance_rate: Some(ts.provenance.acceptance_rate),
            details: json!({
                "params": inst.minimum.params,
                "optimizer": {
                    "energy": inst.minimum.energy,
                    "evaluations": inst.minimum.evaluations,
                    "converged": inst.minimum.converged,
                },
                "fits": cdr.fits,
                "constant_fits": constant.map(|c| c.fits),
                "zne": zne_details(inst),
                "zne_errors": inst.zne_errors,
                "provenance": ts.provenance,
            }),
        };
        let csv = (format!("training/instance{i}_N{n}.csv"), ts.to_csv());
        Ok::<_, CdrError>((record, csv, inst.seconds + started.elapsed().as_secs_f64()))
    })?;

    let mut records = Vec::new();
    let mut files = Vec::new();
    let mut timings = Vec::new();
    for (r, csv, t) in jobs {
        timings.push((r.key.clone(), t));
        files.push(csv);
        records.push(r);
    }

    let rel = |r: &InstanceRecord, m: &str| r.methods.get(m).map_or(f64::NAN, |x| x.relative_error);
    files.push((
        "fig2-like.dat".into(),
        dat_file(
            "instance N exact noisy cdr cdr_error_bar rel_noisy rel_cdr",
            records.iter().map(|r| {
                let cdr = &r.methods["cdr"];
                vec![
                    r.instance as f64,
                    r.n_non_clifford.unwrap_or(0) as f64,
                    r.exact.unwrap_or(f64::NAN),
                    r.methods["noisy"].value.unwrap_or(f64::NAN),
                    cdr.value.unwrap_or(f64::NAN),
                    cdr.error_bar.unwrap_or(f64::NAN),
                    rel(r, "noisy"),
                    rel(r, "cdr"),
                ]
            }),
        ),
    ));
    let mut calibration = BTreeMap::new();
    let mut fig3 = Vec::new();
    for &n in &ns {
        let rs: Vec<&InstanceRecord> = records.iter().filter(|r| r.n_non_clifford == Some(n)).collect();
        let within = rs
            .iter()
            .filter(|r| {
                let c = &r.methods["cdr"];
                (c.value.unwrap_or(f64::NAN) - r.exact.unwrap_or(f64::NAN)).abs() <= c.error_bar.unwrap_or(0.0)
            })
            .count();
        calibration.insert(n.to_string(), within as f64 / rs.len() as f64);
        let mean = |m: &str| rs.iter().map(|r| rel(r, m)).sum::<f64>() / rs.len() as f64;
        let max_cdr = rs.iter().map(|r| rel(r, "cdr")).fold(f64::NEG_INFINITY, f64::max);
        fig3.push(vec![n as f64, mean("noisy"), mean("cdr"), max_cdr]);
    }
    files.push((
        "fig3a-like.dat".into(),
        dat_file("N mean_rel_noisy mean_rel_cdr max_rel_cdr", fig3),
    ));
    if w.constant_ansatz {
        files.push((
            "fig10-like.dat".into(),
            dat_file(
                "instance N rel_cdr rel_constant",
                records.iter().map(|r| {
                    vec![r.instance as f64, r.n_non_clifford.unwrap_or(0) as f64, rel(r, "cdr"), rel(r, "constant")]
                }),
            ),
        ));
    }
    if cfg.zne.is_some() {
        files.push(zne_file(&records));
    }
    let report = json!({ "calibration_within_error_bar": calibration });
    Ok(Artifacts {
        results: ResultSet::new(cfg, records, report),
        files,
        timings,
    })
}

fn zne_file(records: &[InstanceRecord]) -> (String, String) {
    let kinds: Vec<String> = ZneKind::ALL.iter().map(|k| format!("zne-{}", k.name())).collect();
    let header = format!("instance rel_noisy {}", kinds.iter().map(|k| format!("rel_{k}")).collect::<Vec<_>>().join(" "));
    let rows = records.iter().map(|r| {
        let mut row = vec![r.instance as f64, r.methods["noisy"].relative_error];
        row.extend(kinds.iter().map(|k| r.methods.get(k).map_or(f64::NAN, |m| m.relative_error)));
        row
    });
    ("zne-like.dat".into(), dat_file(&header, rows))
}

pub(crate) fn run_zne(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let w = cfg.require_qaoa()?;
    let (sims, instances) = prepare_all(cfg, w, true)?;
    let terms = sims.observable.len() as u64;
    let scales = cfg.zne_scales()?;
    let mut records = Vec::new();
    let mut timings = Vec::new();
    for (i, inst) in instances.iter().enumerate() {
        let mut methods = BTreeMap::new();
        methods.insert("noisy".to_string(), MethodResult::scalar(inst.noisy, None, inst.exact));
        zne_methods(inst, &mut methods);
        let shots_total = match cfg.shots {
            Some(s) => Some(s.per_term(sims.observable.len())? * terms * scales.len() as u64),
            None => None,
        };
        timings.push((i.to_string(), inst.seconds));
        records.push(InstanceRecord {
            key: i.to_string(),
            instance: i,
            n_non_clifford: None,
            exact: Some(inst.exact),
            methods,
            shots_total,
            xi_mcmc: None,
            acceptance_rate: None,
            details: json!({
                "params": inst.minimum.params,
                "zne": zne_details(inst),
                "zne_errors": inst.zne_errors,
            }),
        });
    }
    let files = vec![zne_file(&records)];
    Ok(Artifacts {
        results: ResultSet::new(cfg, records, json!({ "scales": scales })),
        files,
        timings,
    })
}

/// A raw chain on the first QAOA instance: likelihood trace, acceptance and
/// autocorrelation of the angle vectors.
pub(crate) fn run_diagnostics(cfg: &ExperimentConfig) -> Result<Artifacts> {
    let w = QaoaWorkload {
        instances: 1,
        ..cfg.require_qaoa()?.clone()
    };
    let diag = cfg.diagnostics.unwrap_or_default();
    let (sims, instances) = prepare_all(cfg, &w, false)?;
    let inst = &instances[0];
    let started = Instant::now();
    let n = refinement_values(&w, &cfg.chain)[0];
    let chain = chain_for(cfg, &w, 0, n);
    let projector = Projector::new(&inst.circuit, chain.sigma, chain.distance_norm)?;
    let likelihood = match chain.likelihood {
        Likelihood::NoisyProximity { sigma, target: None } => Likelihood::NoisyProximity {
            sigma,
            target: Some(inst.noisy * chain.x_scale),
        },
        l => l,
    };
    let value = |label: u64, index: usize, c: &Circuit| -> Result<f64> {
        let terms = match likelihood.source() {
            Source::Exact => sims.exact_terms(c)?,
            Source::Noisy => sims.noisy_terms(c, rng::derive_path(chain.seed, &[label, index as u64]))?,
        };
        Ok(sims.observable.combine(&terms) * chain.x_scale)
    };

    let mut init_rng = rng::stream(rng::derive(chain.seed, 1));
    let (mut state, mut ln_l, _) = initial_projection(&projector, &chain, &mut init_rng, |j, s| {
        Ok(likelihood.ln_value(value(1, j, &projector.realize(s))?))
    })?;
    let mut x = value(1, usize::MAX, &projector.realize(&state))?;
    let mut chain_rng = rng::stream(rng::derive(chain.seed, 2));
    let mut trace = vec![vec![0.0, x, 1.0]];
    let mut angles = vec![projector.angle_vector(&state)];
    let mut accepted_total = 0usize;
    for step in 1..=diag.steps {
        let mut x_new = x;
        let (next, ln_next, accepted) = mcmc_step(&projector, &state, ln_l, &chain, &mut chain_rng, |cand| {
            x_new = value(3, step, &projector.realize(cand))?;
            Ok(likelihood.ln_value(x_new))
        })?;
        if accepted {
            accepted_total += 1;
            x = x_new;
        }
        state = next;
        ln_l = ln_next;
        trace.push(vec![step as f64, x, if accepted { 1.0 } else { 0.0 }]);
        angles.push(projector.angle_vector(&state));
    }
    let ratios = autocorrelation(&angles, 0, diag.max_lag).unwrap_or_default();
    let (xi, xi_error) = match autocorrelation_length(&angles, 0) {
        Ok(xi) => (Some(xi as f64), None),
        Err(e) => (None, Some(e.to_string())),
    };
    let acceptance = accepted_total as f64 / diag.steps.max(1) as f64;
    let record = InstanceRecord {
        key: "0".into(),
        instance: 0,
        n_non_clifford: Some(n),
        exact: Some(inst.exact),
        methods: BTreeMap::new(),
        shots_total: None,
        xi_mcmc: xi,
        acceptance_rate: Some(acceptance),
        details: json!({
            "steps": diag.steps,
            "likelihood": likelihood,
            "xi_error": xi_error,
            "initial_value": trace[0][1],
            "final_value": x,
        }),
    };
    let files = vec![
        ("fig6-like.dat".into(), dat_file("step value accepted", trace)),
        (
            "autocorrelation.dat".into(),
            dat_file(
                "lag normalized_autocovariance",
                ratios.iter().enumerate().map(|(k, r)| vec![(k + 1) as f64, *r]),
            ),
        ),
    ];
    let timings = vec![("0".to_string(), inst.seconds + started.elapsed().as_secs_f64())];
    Ok(Artifacts {
        results: ResultSet::new(cfg, vec![record], json!({})),
        files,
        timings,
    })
}
