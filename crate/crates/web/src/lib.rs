//! Browser bindings: three small interactive computations returning JSON.

use cdrkit::circuit::{clifford_substitution_weights, Angle, DistanceNorm, Observable, PauliString, PauliTerm};
use cdrkit::regression::{analytic_depolarizing_coefficients, fit_linear, predict};
use cdrkit::sim_exact::{SimLimits, StateSpec};
use cdrkit::sim_noisy::NoiseModel;
use cdrkit::trainingset::{build_training_set, ChainConfig, Likelihood, Simulators};
use cdrkit::workloads::qpe::{binned_eigen_weights, exact_series, spectral_decomposition, QpeSpec};
use cdrkit::workloads::{build_qaoa_circuit, ising_observable, IsingSpec, QaoaParams};
use serde_json::json;
use wasm_bindgen::prelude::*;

fn js_err(e: impl std::fmt::Display) -> JsValue {
    JsValue::from_str(&e.to_string())
}

/// Probabilities of replacing `RZ(angle)` by each `RZ(nπ/2)`.
#[wasm_bindgen]
pub fn substitution_weights(angle: f64, sigma: f64) -> Result<String, JsValue> {
    let w = clifford_substitution_weights(Angle::new(angle), sigma, DistanceNorm::default()).map_err(js_err)?;
    Ok(json!({
        "distances": w.distances,
        "probabilities": w.probabilities,
        "argmax": w.argmax(),
    })
    .to_string())
}

/// Trains the linear correction on a random two-layer QAOA circuit under
/// global depolarizing noise and compares with the closed-form coefficients.
#[wasm_bindgen]
pub fn depolarizing_fit(qubits: usize, p_err: f64, m: usize, seed: u64) -> Result<String, JsValue> {
    let spec = IsingSpec::new(qubits, 2.0).map_err(js_err)?;
    let mut terms = ising_observable(&spec).terms().to_vec();
    terms.push(PauliTerm {
        coeff: 1.0,
        paulis: PauliString::identity(qubits),
    });
    let obs = Observable::new(terms).map_err(js_err)?;
    let angle = |k: u64| 0.3 + 0.7 * ((seed.wrapping_mul(31).wrapping_add(k) % 97) as f64 / 97.0);
    let params = QaoaParams {
        betas: vec![angle(1), angle(2)],
        gammas: vec![angle(3), angle(4)],
    };
    let circuit = build_qaoa_circuit(&spec, &params).map_err(js_err)?;
    let noise = NoiseModel::global_depolarizing(p_err, m);
    let mut sims = Simulators::new(obs.clone(), StateSpec::AllZero, noise);
    sims.shots = None;
    let cfg = ChainConfig {
        n_non_clifford: 3,
        training_count: 10,
        chain_length: 200,
        n_init: 20,
        likelihood: Likelihood::Uniform,
        seed,
        ..ChainConfig::default()
    };
    let ts = build_training_set(&circuit, &cfg, &sims).map_err(js_err)?;
    let samples = ts.observable_samples(&obs);
    let fit = fit_linear(&samples).map_err(js_err)?;
    let dim = (1u64 << qubits) as f64;
    let (a1, a2) = analytic_depolarizing_coefficients(p_err, m as u32, obs.normalized_trace() * dim, dim).map_err(js_err)?;
    let exact = obs.combine(&sims.exact_terms(&circuit).map_err(js_err)?);
    let noisy = obs.combine(&sims.noisy_terms(&circuit, seed).map_err(js_err)?);
    let corrected = predict(&fit, noisy);
    Ok(json!({
        "samples": samples.iter().map(|s| [s.x_noisy, s.x_exact]).collect::<Vec<_>>(),
        "fit": { "a1": fit.a1, "a2": fit.a2, "error_bar": fit.error_bar },
        "analytic": { "a1": a1, "a2": a2 },
        "exact": exact,
        "noisy": noisy,
        "corrected": corrected.value,
    })
    .to_string())
}

/// Noiseless phase-estimation series of the three-qubit Hamiltonian for a
/// product input state and its binned spectral decomposition.
#[wasm_bindgen]
pub fn qpe_spectrum(input_angles: Vec<f64>) -> Result<String, JsValue> {
    let spec = QpeSpec::new(input_angles);
    let limits = SimLimits::default();
    let series = exact_series(&spec, &limits).map_err(js_err)?;
    let q = spectral_decomposition(&series, &spec).map_err(js_err)?;
    let truth = binned_eigen_weights(&spec, &limits).map_err(js_err)?;
    Ok(json!({
        "times": spec.times,
        "re": series.iter().map(|g| g.re).collect::<Vec<_>>(),
        "im": series.iter().map(|g| g.im).collect::<Vec<_>>(),
        "bins": spec.bin_centers,
        "q_fit": q,
        "q_truth": truth,
    })
    .to_string())
}
