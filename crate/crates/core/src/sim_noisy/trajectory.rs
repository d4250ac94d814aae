use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::NoiseModel;
use crate::circuit::{Circuit, Gate, Observable};
use crate::error::{CdrError, Result};
use crate::sim_exact::{SimLimits, StateSpec, StateVector};
use crate::{par, rng};

/// Monte Carlo estimate of one expectation value.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryEstimate {
    pub mean: f64,
    pub std_error: f64,
}

fn random_pauli_gate(code: u8, q: usize) -> Option<Gate> {
    match code {
        1 => Some(Gate::X(q)),
        2 => Some(Gate::Y(q)),
        3 => Some(Gate::Z(q)),
        _ => None,
    }
}

fn apply_code(sv: &mut StateVector, code: u8, q: usize) {
    if let Some(g) = random_pauli_gate(code, q) {
        sv.apply(&g);
    }
}

fn damp(sv: &mut StateVector, q: usize, gamma: f64, rng: &mut ChaCha8Rng) {
    let bit = 1usize << q;
    let p_one: f64 = sv
        .amplitudes()
        .iter()
        .enumerate()
        .filter(|(i, _)| i & bit != 0)
        .map(|(_, a)| a.norm_sqr())
        .sum();
    let jump = rng.random::<f64>() < gamma * p_one;
    let keep = (1.0 - gamma).sqrt();
    let amps = sv.amplitudes_mut();
    for i in 0..amps.len() {
        if i & bit != 0 {
            if jump {
                amps[i ^ bit] = amps[i];
                amps[i] = 0.0.into();
            } else {
                amps[i] *= keep;
            }
        }
    }
    sv.normalize();
}

fn one_trajectory(
    circuit: &Circuit,
    obs: &Observable,
    init: &StateSpec,
    noise: &NoiseModel,
    fires: &[usize],
    limits: &SimLimits,
    seed: u64,
) -> Result<Vec<f64>> {
    let mut rng = rng::stream(seed);
    let mut sv = StateVector::new(circuit.num_qubits(), init, limits)?;
    let (p1, p2, pg) = (noise.eff_p1(), noise.eff_p2(), noise.eff_p_global());
    let (gamma, alpha) = (noise.scaled_gamma(), noise.mix_alpha);
    let global = |sv: &mut StateVector, rng: &mut ChaCha8Rng| {
        if rng.random::<f64>() < pg {
            for q in 0..circuit.num_qubits() {
                apply_code(sv, rng.random_range(0..4), q);
            }
        }
    };
    for (i, g) in circuit.gates().iter().enumerate() {
        sv.apply(g);
        let qs = g.qubits();
        match qs.as_slice() {
            [q] => {
                if rng.random::<f64>() < p1 {
                    apply_code(&mut sv, rng.random_range(1..4), *q);
                }
            }
            [c, t] => {
                if rng.random::<f64>() < p2 {
                    let code: u8 = rng.random_range(1..16);
                    apply_code(&mut sv, code & 3, *c);
                    apply_code(&mut sv, code >> 2, *t);
                }
            }
            _ => unreachable!(),
        }
        if gamma > 0.0 {
            for &q in &qs {
                if rng.random::<f64>() < alpha {
                    damp(&mut sv, q, gamma, &mut rng);
                }
            }
        }
        for _ in 0..fires[i] {
            global(&mut sv, &mut rng);
        }
    }
    if circuit.is_empty() {
        for _ in 0..fires[0] {
            global(&mut sv, &mut rng);
        }
    }
    Ok(sv.term_expectations(obs))
}

fn estimate(values: impl ExactSizeIterator<Item = f64> + Clone) -> TrajectoryEstimate {
    let n = values.len() as f64;
    let mean = values.clone().sum::<f64>() / n;
    let var = if n > 1.0 {
        values.map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1.0)
    } else {
        0.0
    };
    TrajectoryEstimate {
        mean,
        std_error: (var / n).sqrt(),
    }
}

/// Per-trajectory term values; `None` when the model is noiseless and the
/// exact values were returned instead.
fn run_trajectories(
    circuit: &Circuit,
    obs: &Observable,
    init: &StateSpec,
    noise: &NoiseModel,
    n_traj: usize,
    rng_seed: u64,
    limits: &SimLimits,
) -> Result<std::result::Result<Vec<Vec<f64>>, Vec<f64>>> {
    noise.validate()?;
    obs.check_width(circuit.num_qubits())?;
    if noise.is_noiseless() {
        let mut sv = StateVector::new(circuit.num_qubits(), init, limits)?;
        sv.apply_circuit(circuit);
        return Ok(Err(sv.term_expectations(obs)));
    }
    if n_traj == 0 {
        return Err(CdrError::Invalid("at least one trajectory is required".into()));
    }
    let mut fires = vec![0usize; circuit.len().max(1)];
    if noise.eff_p_global() > 0.0 {
        for pos in noise.global_positions(circuit.len()) {
            fires[pos] += 1;
        }
    }
    let runs = par::try_map_indices(n_traj, |j| {
        one_trajectory(circuit, obs, init, noise, &fires, limits, rng::derive(rng_seed, j as u64))
    })?;
    Ok(Ok(runs))
}

/// Per-term trajectory averages. Trajectory `j` uses a seed derived from
/// `(rng_seed, j)`, so the result does not depend on the worker count.
pub fn trajectory_terms(
    circuit: &Circuit,
    obs: &Observable,
    init: &StateSpec,
    noise: &NoiseModel,
    n_traj: usize,
    rng_seed: u64,
    limits: &SimLimits,
) -> Result<Vec<TrajectoryEstimate>> {
    Ok(match run_trajectories(circuit, obs, init, noise, n_traj, rng_seed, limits)? {
        Ok(runs) => (0..obs.len()).map(|k| estimate(runs.iter().map(|r| r[k]))).collect(),
        Err(exact) => exact
            .into_iter()
            .map(|mean| TrajectoryEstimate { mean, std_error: 0.0 })
            .collect(),
    })
}

pub fn trajectory_expectation(
    circuit: &Circuit,
    obs: &Observable,
    init: &StateSpec,
    noise: &NoiseModel,
    n_traj: usize,
    rng_seed: u64,
    limits: &SimLimits,
) -> Result<TrajectoryEstimate> {
    Ok(match run_trajectories(circuit, obs, init, noise, n_traj, rng_seed, limits)? {
        Ok(runs) => estimate(runs.iter().map(|r| obs.combine(r))),
        Err(exact) => TrajectoryEstimate {
            mean: obs.combine(&exact),
            std_error: 0.0,
        },
    })
}
