//! End-to-end acceptance checks, one test per criterion. Each test writes a
//! `criterion N PASS|FAIL` line straight to stderr so it shows up without
//! `--nocapture`.

mod common;

use std::collections::{BTreeMap, HashMap, HashSet};
use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::path::{Path, PathBuf};
use std::sync::OnceLock;

use cdrkit::circuit::{GateKind, PauliString, PauliTerm};
use cdrkit::experiment::{self, ExperimentConfig, ResultSet, RunOptions};
use cdrkit::regression::{fit_linear, predict, zne_extrapolate, ZneKind};
use cdrkit::sim_exact::{pauli_propagation_terms, statevector_terms, SimLimits, StateSpec};
use cdrkit::sim_noisy::{density_matrix_terms, NoiseModel};
use cdrkit::trainingset::{build_training_set, mcmc_step, ChainConfig, Likelihood, NearCliffordState, Projector, Simulators};
use cdrkit::workloads::{build_qaoa_circuit, ising_observable, IsingSpec, QaoaParams};
use cdrkit::{Circuit, Gate, Observable};
use num_complex::Complex64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde_json::Value;

use common::dense::*;

fn verdict(n: u32, pass: bool, detail: &str) {
    let line = format!("criterion {n:>2} {}  {detail}\n", if pass { "PASS" } else { "FAIL" });
    std::io::stderr().write_all(line.as_bytes()).unwrap();
    assert!(pass, "criterion {n} failed: {detail}");
}

fn config_dir() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn load_config(name: &str, edit: impl FnOnce(&mut Value)) -> ExperimentConfig {
    let text = std::fs::read_to_string(config_dir().join(name)).unwrap();
    let mut v: Value = serde_json::from_str(&text).unwrap();
    edit(&mut v);
    ExperimentConfig::from_json(&v.to_string()).unwrap()
}

fn random_params(rng: &mut ChaCha8Rng, p: usize) -> QaoaParams {
    QaoaParams {
        betas: (0..p).map(|_| rng.random_range(-PI..PI)).collect(),
        gammas: (0..p).map(|_| rng.random_range(-PI..PI)).collect(),
    }
}

#[test]
fn criterion_01_global_depolarizing_exactness() {
    let spec = IsingSpec::new(4, 1.0).unwrap();
    let offset = 0.7;
    let mut terms = ising_observable(&spec).terms().to_vec();
    terms.push(PauliTerm {
        coeff: offset,
        paulis: PauliString::identity(4),
    });
    let obs = Observable::new(terms).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let circuit = build_qaoa_circuit(&spec, &random_params(&mut rng, 2)).unwrap();

    let mut worst: f64 = 0.0;
    let mut fewest_distinct = usize::MAX;
    for p in [0.01, 0.05, 0.1] {
        for m in [1usize, 5, 20] {
            let mut sims = Simulators::new(obs.clone(), StateSpec::AllZero, NoiseModel::global_depolarizing(p, m));
            sims.shots = None;
            let cfg = ChainConfig {
                n_non_clifford: 3,
                training_count: 8,
                chain_length: 400,
                likelihood: Likelihood::Uniform,
                seed: 7 + m as u64,
                ..ChainConfig::default()
            };
            let ts = build_training_set(&circuit, &cfg, &sims).unwrap();
            let samples = ts.observable_samples(&obs);
            let distinct: HashSet<u64> = samples.iter().map(|s| s.x_exact.to_bits()).collect();
            fewest_distinct = fewest_distinct.min(distinct.len());
            let fit = fit_linear(&samples).unwrap();

            // only the identity term survives the trace: Tr(X)/d = offset
            let f = (1.0 - p).powi(m as i32);
            let a1 = 1.0 / f;
            let a2 = -(1.0 - f) * offset / f;
            let exact = obs.combine(&sims.exact_terms(&circuit).unwrap());
            let noisy = obs.combine(&sims.noisy_terms(&circuit, 0).unwrap());
            let corrected = predict(&fit, noisy).value;
            worst = worst
                .max((fit.a1 - a1).abs())
                .max((fit.a2 - a2).abs())
                .max((corrected - exact).abs());
        }
    }
    verdict(
        1,
        worst <= 1e-9 && fewest_distinct >= 3,
        &format!("max |fit - closed form| and |corrected - exact| = {worst:.2e}; min distinct training circuits {fewest_distinct}"),
    );
}

#[test]
fn criterion_02_simulator_equivalence() {
    let limits = SimLimits::default();
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    let circuits = 1000;
    for k in 0..circuits {
        let q = rng.random_range(2..=8);
        let rotations = rng.random_range(0..=10);
        let len = rotations + rng.random_range(5..40);
        let c = common::random_circuit(&mut rng, q, len, rotations);
        let obs = common::random_observable(&mut rng, q, 4);
        let init = if k % 3 == 0 {
            StateSpec::ProductRotations {
                angles: (0..2 * q).map(|_| rng.random_range(0.0..2.0 * PI)).collect(),
            }
        } else if k % 3 == 1 {
            StateSpec::AllPlus
        } else {
            StateSpec::AllZero
        };
        let prop = pauli_propagation_terms(&c, &obs, &init, limits.max_terms).unwrap();
        let sv = statevector_terms(&c, &obs, &init, &limits).unwrap();
        let dm = density_matrix_terms(&c, &obs, &init, &NoiseModel::noiseless(), &limits).unwrap();
        for ((a, b), d) in prop.iter().zip(&sv).zip(&dm) {
            worst = worst.max((a - b).abs()).max((a - d).abs()).max((b - d).abs());
        }
    }
    verdict(2, worst <= 1e-10, &format!("{circuits} random circuits, max pairwise deviation {worst:.2e}"));
}

#[test]
fn criterion_03_qaoa_structure() {
    let mut counts_ok = true;
    for q in [4, 8, 16, 32, 64] {
        for p in 1..=4 {
            let spec = IsingSpec::new(q, 2.0).unwrap();
            let params = QaoaParams {
                betas: vec![0.3; p],
                gammas: vec![0.7; p],
            };
            let c = build_qaoa_circuit(&spec, &params).unwrap();
            counts_ok &= c.count(GateKind::Rz) == (2 * q - 1) * p && c.count(GateKind::Cnot) == (2 * q - 2) * p;
        }
    }
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut worst: f64 = 0.0;
    for q in 2..=4 {
        for p in 1..=3 {
            let spec = IsingSpec::new(q, rng.random_range(0.5..3.0)).unwrap();
            let params = random_params(&mut rng, p);
            let u = circuit_unitary(&build_qaoa_circuit(&spec, &params).unwrap());
            let v = qaoa_oracle(&spec, &params);
            // angles are stored mod 2π, which can flip the global sign
            let phase = (v.adjoint() * &u).trace();
            let phase = phase / phase.norm();
            worst = worst.max((u - v * phase).norm());
        }
    }
    verdict(
        3,
        counts_ok && worst <= 1e-9,
        &format!("gate counts match for Q in {{4..64}}, p in 1..4: {counts_ok}; unitary deviation {worst:.2e}"),
    );
}

/// 2×2 gate matrices written out by hand for the toy-circuit oracle.
fn mat2(gate: &str, theta: f64) -> [[Complex64; 2]; 2] {
    let c = |re: f64, im: f64| Complex64::new(re, im);
    let s = std::f64::consts::FRAC_1_SQRT_2;
    match gate {
        "h" => [[c(s, 0.0), c(s, 0.0)], [c(s, 0.0), c(-s, 0.0)]],
        "rz" => [[Complex64::from_polar(1.0, -theta / 2.0), c(0.0, 0.0)], [c(0.0, 0.0), Complex64::from_polar(1.0, theta / 2.0)]],
        "rx" => {
            let (co, si) = ((theta / 2.0).cos(), (theta / 2.0).sin());
            [[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]]
        }
        _ => unreachable!(),
    }
}

fn apply1(psi: &mut [Complex64; 4], q: usize, m: [[Complex64; 2]; 2]) {
    let bit = 1 << q;
    for i in 0..4 {
        if i & bit == 0 {
            let (a, b) = (psi[i], psi[i | bit]);
            psi[i] = m[0][0] * a + m[0][1] * b;
            psi[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }
}

/// ⟨Z₀⟩ + 0.5⟨X₁⟩ after H₀, RZ₀(a), CNOT(0,1), RX₁(b), H₁, RZ₁(c) on |00⟩.
fn toy_oracle(angles: [f64; 3]) -> f64 {
    let mut psi = [Complex64::new(0.0, 0.0); 4];
    psi[0] = Complex64::new(1.0, 0.0);
    apply1(&mut psi, 0, mat2("h", 0.0));
    apply1(&mut psi, 0, mat2("rz", angles[0]));
    psi.swap(1, 3);
    apply1(&mut psi, 1, mat2("rx", angles[1]));
    apply1(&mut psi, 1, mat2("h", 0.0));
    apply1(&mut psi, 1, mat2("rz", angles[2]));
    let z0: f64 = (0..4).map(|i| psi[i].norm_sqr() * if i & 1 == 0 { 1.0 } else { -1.0 }).sum();
    let x1: f64 = (0..4).filter(|i| i & 2 == 0).map(|i| 2.0 * (psi[i].conj() * psi[i | 2]).re).sum();
    z0 + 0.5 * x1
}

#[test]
fn criterion_04_mcmc_stationarity() {
    let base = [0.6, 2.0, -0.9];
    let circuit = Circuit::from_gates(
        2,
        [
            Gate::H(0),
            Gate::rz(0, base[0]),
            Gate::cnot(0, 1),
            Gate::rx(1, base[1]),
            Gate::H(1),
            Gate::rz(1, base[2]),
        ],
    )
    .unwrap();
    let obs = Observable::new([
        PauliTerm {
            coeff: 1.0,
            paulis: PauliString::parse("ZI").unwrap(),
        },
        PauliTerm {
            coeff: 0.5,
            paulis: PauliString::parse("IX").unwrap(),
        },
    ])
    .unwrap();
    let likelihood = Likelihood::GaussianTarget { x0: 0.2, sigma: 0.8 };
    let cfg = ChainConfig {
        n_non_clifford: 1,
        sigma: 1.5,
        likelihood,
        ..ChainConfig::default()
    };
    let sims = Simulators::new(obs.clone(), StateSpec::AllZero, NoiseModel::noiseless());
    let projector = Projector::new(&circuit, cfg.sigma, cfg.distance_norm).unwrap();
    let ln_l = |s: &NearCliffordState| -> cdrkit::Result<f64> {
        Ok(likelihood.ln_value(obs.combine(&sims.exact_terms(&projector.realize(s))?)))
    };

    // brute-force target: every state with one kept rotation
    let mut target: HashMap<NearCliffordState, f64> = HashMap::new();
    for keep in 0..3 {
        for code in 0..16usize {
            let mut powers = vec![0u8; 3];
            let others: Vec<usize> = (0..3).filter(|&s| s != keep).collect();
            powers[others[0]] = (code & 3) as u8;
            powers[others[1]] = (code >> 2) as u8;
            let mut angles = [0.0; 3];
            for s in 0..3 {
                angles[s] = if s == keep { base[s] } else { f64::from(powers[s]) * FRAC_PI_2 };
            }
            let x = toy_oracle(angles);
            let state = NearCliffordState {
                kept: (0..3).map(|s| s == keep).collect(),
                powers,
            };
            target.insert(state, (-((x - 0.2) / 0.8).powi(2)).exp());
        }
    }
    let z: f64 = target.values().sum();

    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let mut state = NearCliffordState {
        kept: vec![true, false, false],
        powers: vec![0, 0, 0],
    };
    let mut ln = ln_l(&state).unwrap();
    let steps = 100_000;
    let mut visits: HashMap<NearCliffordState, usize> = HashMap::new();
    let mut preserved = true;
    for _ in 0..steps {
        let (next, ln_next, _) = mcmc_step(&projector, &state, ln, &cfg, &mut rng, &ln_l).unwrap();
        preserved &= next.non_clifford_count() == 1;
        state = next;
        ln = ln_next;
        *visits.entry(state.clone()).or_default() += 1;
    }
    let tv: f64 = target
        .iter()
        .map(|(s, w)| (w / z - visits.get(s).copied().unwrap_or(0) as f64 / steps as f64).abs())
        .sum::<f64>()
        / 2.0;
    verdict(
        4,
        tv <= 0.05 && preserved && visits.keys().all(|s| target.contains_key(s)),
        &format!("TV distance {tv:.4} after {steps} steps; N preserved: {preserved}"),
    );
}

/// The Q = 8 suite swept over N ∈ {2, 8, 16, 24}; N = 16 is the headline run.
fn qaoa_suite() -> &'static ResultSet {
    static SUITE: OnceLock<ResultSet> = OnceLock::new();
    SUITE.get_or_init(|| {
        let cfg = load_config("qaoa-cdr.json", |v| {
            v["qaoa"]["refinement"] = serde_json::json!([2, 8, 16, 24]);
        });
        experiment::execute(&cfg).unwrap().results
    })
}

fn records_at(rs: &ResultSet, n: usize) -> Vec<&experiment::InstanceRecord> {
    rs.records.iter().filter(|r| r.n_non_clifford == Some(n)).collect()
}

#[test]
fn criterion_05_cdr_gain() {
    let rs = qaoa_suite();
    let noisy = rs.mean_error("noisy", Some(16)).unwrap();
    let cdr = rs.mean_error("cdr", Some(16)).unwrap();
    let shots = records_at(rs, 16)[0].shots_total.unwrap();
    verdict(
        5,
        cdr <= noisy / 3.0,
        &format!("mean relative error noisy {noisy:.4e}, cdr {cdr:.4e} (ratio {:.3}); shots per instance {shots}", cdr / noisy),
    );
}

fn ranks(v: &[f64]) -> Vec<f64> {
    v.iter()
        .map(|x| {
            let below = v.iter().filter(|y| *y < x).count() as f64;
            let equal = v.iter().filter(|y| *y == x).count() as f64;
            below + (equal + 1.0) / 2.0
        })
        .collect()
}

fn spearman(a: &[f64], b: &[f64]) -> f64 {
    let (ra, rb) = (ranks(a), ranks(b));
    let mean = |v: &[f64]| v.iter().sum::<f64>() / v.len() as f64;
    let (ma, mb) = (mean(&ra), mean(&rb));
    let cov: f64 = ra.iter().zip(&rb).map(|(x, y)| (x - ma) * (y - mb)).sum();
    let var = |v: &[f64], m: f64| v.iter().map(|x| (x - m).powi(2)).sum::<f64>();
    cov / (var(&ra, ma) * var(&rb, mb)).sqrt()
}

#[test]
fn criterion_06_refinement_trend() {
    let rs = qaoa_suite();
    let ns = [2usize, 8, 16, 24];
    let means: Vec<f64> = ns.iter().map(|&n| rs.mean_error("cdr", Some(n)).unwrap()).collect();
    let rho = spearman(&ns.map(|n| n as f64), &means);
    let listing: Vec<String> = ns.iter().zip(&means).map(|(n, m)| format!("N={n}: {m:.3e}")).collect();
    verdict(6, rho <= 0.0, &format!("Spearman {rho:.2}; {}", listing.join(", ")));
}

#[test]
fn criterion_07_linear_vs_constant() {
    let rs = qaoa_suite();
    let cdr = rs.mean_error("cdr", Some(16)).unwrap();
    let constant = rs.mean_error("constant", Some(16)).unwrap();
    verdict(7, cdr <= constant, &format!("mean relative error linear {cdr:.4e}, constant {constant:.4e}"));
}

#[test]
fn criterion_08_zne() {
    let cubic = |c: f64| 0.3 - 0.2 * c + 0.05 * c * c - 0.01 * c * c * c;
    let pts: Vec<(f64, f64)> = [1.0, 1.5, 2.0, 2.5, 3.0].iter().map(|&c| (c, cubic(c))).collect();
    let cubic_err = (zne_extrapolate(&pts, ZneKind::Cubic).unwrap().value_at_zero - 0.3).abs();

    // v(c) = t + (x − t)·f^c: the global channel stretched to c times its strength
    let spec = IsingSpec::new(3, 1.0).unwrap();
    let mut terms = ising_observable(&spec).terms().to_vec();
    terms.push(PauliTerm {
        coeff: 0.4,
        paulis: PauliString::identity(3),
    });
    let obs = Observable::new(terms).unwrap();
    let mut rng = ChaCha8Rng::seed_from_u64(808);
    let circuit = build_qaoa_circuit(&spec, &random_params(&mut rng, 2)).unwrap();
    let (p, m) = (0.05, 5);
    let mut sims = Simulators::new(obs.clone(), StateSpec::AllZero, NoiseModel::global_depolarizing(p, m));
    sims.shots = None;
    let exact = obs.combine(&sims.exact_terms(&circuit).unwrap());
    let noisy = obs.combine(&sims.noisy_terms(&circuit, 0).unwrap());
    let f = (1.0 - p).powi(m as i32);
    let v = |c: f64| 0.4 + (exact - 0.4) * f.powf(c);
    let consistency = (v(1.0) - noisy).abs();
    let pts: Vec<(f64, f64)> = [1.0, 1.1, 1.25, 1.5, 2.0].iter().map(|&c| (c, v(c))).collect();
    let exp_fit = zne_extrapolate(&pts, ZneKind::Exponential).unwrap();
    let exp_err = (exp_fit.value_at_zero - exact).abs();

    // reporting on the Q = 8 suite
    let rs = qaoa_suite();
    let mut reported = Vec::new();
    let mut produced = true;
    for k in ZneKind::ALL {
        let name = format!("zne-{}", k.name());
        let recs = records_at(rs, 16);
        produced &= recs.iter().all(|r| r.methods.get(&name).is_some_and(|m| m.value.is_some_and(f64::is_finite)));
        if let Some(e) = rs.mean_error(&name, Some(16)) {
            reported.push(format!("{name} {e:.3e}"));
        }
    }
    verdict(
        8,
        cubic_err <= 1e-9 && exp_err <= 1e-6 && exp_fit.fallback.is_none() && consistency <= 1e-12 && produced,
        &format!(
            "cubic intercept error {cubic_err:.1e}; exponential v(0) error {exp_err:.1e}; suite: {}",
            reported.join(", ")
        ),
    );
}

#[test]
fn criterion_09_error_bars() {
    let rs = qaoa_suite();
    let mut fits = 0usize;
    let mut formula_ok = true;
    for r in &rs.records {
        for key in ["fits", "constant_fits"] {
            for tf in r.details[key].as_array().unwrap() {
                let fit = &tf["fit"];
                let (c, l, bar) = (fit["C"].as_f64().unwrap(), fit["L"].as_f64().unwrap(), fit["error_bar"].as_f64().unwrap());
                formula_ok &= bar == 3.0 * (c / (l - 1.0)).sqrt();
                fits += 1;
            }
        }
    }
    let recs = records_at(rs, 16);
    let within = recs
        .iter()
        .filter(|r| {
            let m = &r.methods["cdr"];
            (m.value.unwrap() - r.exact.unwrap()).abs() <= m.error_bar.unwrap()
        })
        .count() as f64
        / recs.len() as f64;
    verdict(
        9,
        formula_ok && fits > 0 && within >= 0.7,
        &format!("{fits} fits follow 3*sqrt(C/(L-1)): {formula_ok}; within error bar at N=16: {:.0}%", within * 100.0),
    );
}

#[test]
fn criterion_10_qpe() {
    let cfg = load_config("qpe-cdr.json", |_| {});
    let rs = experiment::execute(&cfg).unwrap().results;
    let mean = |m: &str| rs.records.iter().map(|r| r.methods[m].relative_error).sum::<f64>() / rs.records.len() as f64;
    let (noisy, cdr) = (mean("noisy"), mean("cdr"));
    verdict(
        10,
        rs.records.len() == 20 && cdr <= noisy / 2.0,
        &format!("mean l1 error of q: noisy {noisy:.4e}, cdr {cdr:.4e} (ratio {:.3})", cdr / noisy),
    );
}

fn result_files(dir: &Path) -> BTreeMap<PathBuf, Vec<u8>> {
    let mut out = BTreeMap::new();
    let mut stack = vec![dir.to_path_buf()];
    while let Some(d) = stack.pop() {
        for e in std::fs::read_dir(&d).unwrap() {
            let p = e.unwrap().path();
            if p.is_dir() {
                stack.push(p);
            } else if p.file_name().unwrap() != "timing.json" {
                out.insert(p.strip_prefix(dir).unwrap().to_path_buf(), std::fs::read(&p).unwrap());
            }
        }
    }
    out
}

#[test]
fn criterion_11_determinism() {
    let small_chain = serde_json::json!({ "N": 4, "training_count": 8, "n_init": 20, "chain_length": 200 });
    let qaoa = serde_json::json!({ "qubits": 4, "instances": 2 });
    let configs = [
        load_config("qaoa-cdr.json", |v| {
            v["chain"] = small_chain.clone();
            v["qaoa"] = qaoa.clone();
        }),
        load_config("qaoa-cdr.json", |v| {
            v["kind"] = "zne-baseline".into();
            v["chain"] = small_chain.clone();
            v["qaoa"] = qaoa.clone();
        }),
        load_config("qaoa-cdr.json", |v| {
            v["kind"] = "mcmc-diagnostics".into();
            v["chain"] = small_chain.clone();
            v["qaoa"] = qaoa.clone();
            v["diagnostics"] = serde_json::json!({ "steps": 500, "max_lag": 50 });
        }),
        load_config("qpe-cdr.json", |v| {
            v["qpe"]["inputs"] = 1.into();
            v["chain"]["training_count"] = 10.into();
        }),
        load_config("depolarizing.json", |_| {}),
    ];
    let tmp = tempfile::tempdir().unwrap();
    let mut identical = true;
    let mut compared = 0;
    for (k, cfg) in configs.iter().enumerate() {
        let mut outputs = Vec::new();
        for (run, workers) in [(0, 1), (1, 2), (2, 1)] {
            let out = tmp.path().join(format!("{k}-{run}"));
            let opts = RunOptions {
                seed: None,
                workers: Some(workers),
                out: Some(out.clone()),
            };
            experiment::run(cfg, &opts).unwrap();
            outputs.push(result_files(&out));
        }
        identical &= outputs.windows(2).all(|w| w[0] == w[1]);
        compared += outputs[0].len();
    }
    verdict(
        11,
        identical,
        &format!("5 experiment kinds, 3 runs each (workers 1, 2, 1), {compared} files per run set byte-identical: {identical}"),
    );
}
