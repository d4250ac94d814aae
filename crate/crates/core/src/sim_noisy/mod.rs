//! Noisy expectation values.
//!
//! Every gate is followed by local depolarizing noise on the qubits it touches
//! and, optionally, amplitude damping. A global depolarizing channel can be
//! applied `m_global` times at evenly spaced positions in the gate sequence.

pub mod density;
pub mod trajectory;

use rand_distr::{Binomial, Distribution};
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Observable};
use crate::error::{CdrError, Result};
use crate::rng;
use crate::sim_exact::{SimLimits, StateSpec};

pub use density::{density_matrix_expectation, density_matrix_terms, DensityMatrix};
pub use trajectory::{trajectory_expectation, trajectory_terms, TrajectoryEstimate};

/// Noise channels and their strength modifiers.
///
/// Local depolarizing with probability `p` is
/// `ρ → (1−p)ρ + p/(4ᵏ−1) Σ_{P≠I} PρP` on the `k` qubits of the gate.
/// `scale_c` multiplies every rate; `mix_alpha` forms `α·E + (1−α)·id`
/// for each channel `E`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseModel {
    pub p1: f64,
    pub p2: f64,
    pub gamma_ad: f64,
    pub p_global: f64,
    pub m_global: usize,
    pub scale_c: f64,
    pub mix_alpha: f64,
}

impl Default for NoiseModel {
    fn default() -> Self {
        NoiseModel {
            p1: 1e-3,
            p2: 1e-2,
            gamma_ad: 0.0,
            p_global: 0.0,
            m_global: 0,
            scale_c: 1.0,
            mix_alpha: 1.0,
        }
    }
}

impl NoiseModel {
    pub fn noiseless() -> Self {
        NoiseModel {
            p1: 0.0,
            p2: 0.0,
            ..Default::default()
        }
    }

    /// Only the global depolarizing channel, applied `m` times.
    pub fn global_depolarizing(p: f64, m: usize) -> Self {
        NoiseModel {
            p_global: p,
            m_global: m,
            ..Self::noiseless()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let check = |name: &str, v: f64| {
            if !(0.0..=1.0).contains(&v) {
                Err(CdrError::Noise(format!("{name} = {v} is outside [0, 1]")))
            } else {
                Ok(())
            }
        };
        if !(self.scale_c.is_finite() && self.scale_c >= 0.0) {
            return Err(CdrError::Noise(format!("scale_c = {} must be finite and ≥ 0", self.scale_c)));
        }
        check("mix_alpha", self.mix_alpha)?;
        for (name, v) in [
            ("p1", self.p1),
            ("p2", self.p2),
            ("gamma_ad", self.gamma_ad),
            ("p_global", self.p_global),
        ] {
            check(name, v)?;
            if v * self.scale_c > 1.0 {
                return Err(CdrError::Noise(format!(
                    "{name} = {v} scaled by c = {} exceeds 1",
                    self.scale_c
                )));
            }
        }
        Ok(())
    }

    /// Effective depolarizing probability after scaling and mixing.
    pub fn eff_p1(&self) -> f64 {
        self.p1 * self.scale_c * self.mix_alpha
    }

    pub fn eff_p2(&self) -> f64 {
        self.p2 * self.scale_c * self.mix_alpha
    }

    pub fn eff_p_global(&self) -> f64 {
        self.p_global * self.scale_c * self.mix_alpha
    }

    /// Damping rate after scaling; mixing is applied separately.
    pub fn scaled_gamma(&self) -> f64 {
        self.gamma_ad * self.scale_c
    }

    pub fn is_noiseless(&self) -> bool {
        let global = self.m_global > 0 && self.eff_p_global() > 0.0;
        self.eff_p1() == 0.0
            && self.eff_p2() == 0.0
            && !global
            && (self.scaled_gamma() == 0.0 || self.mix_alpha == 0.0)
    }

    /// Gate indices after which the global channel fires (one entry per application).
    pub(crate) fn global_positions(&self, gates: usize) -> Vec<usize> {
        let m = self.m_global;
        (0..m)
            .map(|k| ((k + 1) * gates / m).saturating_sub(1))
            .collect()
    }
}

/// Multiply every channel rate by `c`.
pub fn scale_noise(model: &NoiseModel, c: f64) -> Result<NoiseModel> {
    if !(c.is_finite() && c >= 0.0) {
        return Err(CdrError::Noise(format!("scale factor {c} must be finite and ≥ 0")));
    }
    let scaled = NoiseModel {
        scale_c: model.scale_c * c,
        ..*model
    };
    scaled.validate()?;
    Ok(scaled)
}

/// Replace each channel `E` by `α·E + (1−α)·id`.
pub fn mix_noise(model: &NoiseModel, alpha: f64) -> Result<NoiseModel> {
    if !(0.0..=1.0).contains(&alpha) {
        return Err(CdrError::Noise(format!("mixing weight {alpha} is outside [0, 1]")));
    }
    let mixed = NoiseModel {
        mix_alpha: model.mix_alpha * alpha,
        ..*model
    };
    mixed.validate()?;
    Ok(mixed)
}

/// Measurement budget. Shots are split equally over observable terms unless
/// `shots_per_term` is set.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ShotSpec {
    pub shots_per_circuit: u64,
    pub shots_per_term: Option<u64>,
}

impl Default for ShotSpec {
    fn default() -> Self {
        ShotSpec {
            shots_per_circuit: 16384,
            shots_per_term: None,
        }
    }
}

impl ShotSpec {
    pub fn per_term(&self, terms: usize) -> Result<u64> {
        let shots = match self.shots_per_term {
            Some(s) => s,
            None => self.shots_per_circuit / terms.max(1) as u64,
        };
        if shots == 0 {
            return Err(CdrError::Invalid(format!(
                "{} shots cannot cover {terms} observable terms",
                self.shots_per_circuit
            )));
        }
        Ok(shots)
    }
}

/// Mean of `shots` ±1 outcomes whose expectation is `exact_value`.
pub fn sampled_expectation(exact_value: f64, shots: u64, rng_seed: u64) -> Result<f64> {
    if !(exact_value.abs() <= 1.0 + 1e-9) {
        return Err(CdrError::Domain(format!("Pauli expectation {exact_value} is outside [-1, 1]")));
    }
    if shots == 0 {
        return Err(CdrError::Invalid("shot count must be at least 1".into()));
    }
    let prob = ((1.0 + exact_value) / 2.0).clamp(0.0, 1.0);
    let ups = Binomial::new(shots, prob)
        .expect("probability in [0, 1]")
        .sample(&mut rng::stream(rng_seed));
    Ok(2.0 * ups as f64 / shots as f64 - 1.0)
}

/// Sample every term of a per-term value vector; identity terms are exact.
pub fn sample_terms(obs: &Observable, values: &[f64], shots_per_term: u64, rng_seed: u64) -> Result<Vec<f64>> {
    obs.terms()
        .iter()
        .zip(values)
        .enumerate()
        .map(|(k, (t, &v))| {
            if t.paulis.is_identity() {
                Ok(v)
            } else {
                sampled_expectation(v, shots_per_term, rng::derive(rng_seed, k as u64))
            }
        })
        .collect()
}

/// Which noisy simulator produces per-term values.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum NoisyBackend {
    #[default]
    DensityMatrix,
    Trajectories { trajectories: usize },
}

/// Noisy per-term values for one circuit, before shot sampling.
pub fn noisy_terms(
    circuit: &Circuit,
    obs: &Observable,
    init: &StateSpec,
    noise: &NoiseModel,
    backend: NoisyBackend,
    limits: &SimLimits,
    seed: u64,
) -> Result<Vec<f64>> {
    match backend {
        NoisyBackend::DensityMatrix => density_matrix_terms(circuit, obs, init, noise, limits),
        NoisyBackend::Trajectories { trajectories } => {
            Ok(trajectory_terms(circuit, obs, init, noise, trajectories, seed, limits)?
                .into_iter()
                .map(|e| e.mean)
                .collect())
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn scaling_and_mixing() {
        let m = NoiseModel::default();
        assert_eq!(scale_noise(&m, 1.0).unwrap(), m);
        assert!(scale_noise(&m, 0.0).unwrap().is_noiseless());
        assert!(mix_noise(&m, 0.0).unwrap().is_noiseless());
        assert_eq!(mix_noise(&m, 1.0).unwrap(), m);
        let six = mix_noise(&m, 4.0 / 24.0).unwrap();
        assert!((six.eff_p2() - 1e-2 / 6.0).abs() < 1e-18);
        let twice = scale_noise(&scale_noise(&m, 2.0).unwrap(), 1.5).unwrap();
        assert!((twice.eff_p1() - 3e-3).abs() < 1e-18);
        for c in [1.0, 1.1, 1.25, 1.5] {
            assert!(scale_noise(&m, c).is_ok());
        }
        assert!(scale_noise(&m, 101.0).is_err());
        assert!(mix_noise(&m, 1.5).is_err());
    }

    #[test]
    fn sampling() {
        assert_eq!(sampled_expectation(1.0, 100, 3).unwrap(), 1.0);
        assert_eq!(sampled_expectation(-1.0, 100, 3).unwrap(), -1.0);
        let v = sampled_expectation(0.0, 16384, 9).unwrap();
        assert!(v.abs() < 5.0 / 128.0);
        assert_eq!(sampled_expectation(0.3, 1000, 5).unwrap(), sampled_expectation(0.3, 1000, 5).unwrap());
        assert!(matches!(sampled_expectation(1.1, 10, 0), Err(CdrError::Domain(_))));
        let v = sampled_expectation(0.37, 1 << 30, 1).unwrap();
        assert!((v - 0.37).abs() < 1e-3);
    }

    #[test]
    fn shot_split() {
        let s = ShotSpec::default();
        assert_eq!(s.per_term(15).unwrap(), 1092);
        assert_eq!(s.per_term(1).unwrap(), 16384);
        let o = ShotSpec {
            shots_per_term: Some(8192),
            ..s
        };
        assert_eq!(o.per_term(15).unwrap(), 8192);
    }

    #[test]
    fn global_positions_are_even_and_end_at_last_gate() {
        let m = NoiseModel::global_depolarizing(0.1, 4);
        assert_eq!(m.global_positions(8), vec![1, 3, 5, 7]);
        let m = NoiseModel::global_depolarizing(0.1, 3);
        assert_eq!(m.global_positions(2), vec![0, 0, 1]);
    }
}
