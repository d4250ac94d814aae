//! Exact expectation values.
//!
//! [`statevector`] is a dense reference simulator for small registers.
//! [`propagation`] evolves the observable backwards through the circuit in the
//! Heisenberg picture; Clifford gates map a Pauli string to a single signed
//! string, so the cost grows exponentially only in the number of non-Clifford
//! rotations.

pub mod conjugation;
pub mod propagation;
pub mod statevector;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Angle, Gate};
use crate::error::{CdrError, Result};

pub use conjugation::{clifford_conjugation_table, ConjugationRule};
pub use propagation::{pauli_propagation_expectation, pauli_propagation_terms, PauliFrontier};
pub use statevector::{statevector_expectation, statevector_terms, StateVector};

/// Capacity limits shared by the simulators.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SimLimits {
    pub statevector_max_qubits: usize,
    pub density_max_qubits: usize,
    pub max_terms: usize,
}

impl Default for SimLimits {
    fn default() -> Self {
        SimLimits {
            statevector_max_qubits: 14,
            density_max_qubits: 8,
            max_terms: 1 << 22,
        }
    }
}

/// Initial product state of the register.
///
/// `ProductRotations` carries either one angle per qubit, giving
/// `RZ(b)|+⟩`, or two angles `(a, b)` per qubit, giving
/// `RZ(b)·P·RZ(a)·H|0⟩` with Bloch vector `(cos a cos b, cos a sin b, sin a)`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case", deny_unknown_fields)]
pub enum StateSpec {
    #[default]
    AllZero,
    AllPlus,
    ProductRotations { angles: Vec<f64> },
}

impl StateSpec {
    pub fn validate(&self, qubits: usize) -> Result<()> {
        if let StateSpec::ProductRotations { angles } = self {
            if angles.len() != qubits && angles.len() != 2 * qubits {
                return Err(CdrError::Invalid(format!(
                    "product state needs {qubits} or {} angles, got {}",
                    2 * qubits,
                    angles.len()
                )));
            }
        }
        Ok(())
    }

    /// Gates preparing qubit `q` from `|0⟩`.
    pub fn preparation_gates(&self, qubits: usize, q: usize) -> Vec<Gate> {
        match self {
            StateSpec::AllZero => vec![],
            StateSpec::AllPlus => vec![Gate::H(q)],
            StateSpec::ProductRotations { angles } if angles.len() == qubits => {
                vec![Gate::H(q), Gate::rz(q, angles[q])]
            }
            StateSpec::ProductRotations { angles } => vec![
                Gate::H(q),
                Gate::rz(q, angles[2 * q]),
                Gate::P(q),
                Gate::rz(q, angles[2 * q + 1]),
            ],
        }
    }

    /// Single-qubit amplitudes `(⟨0|χ_q⟩, ⟨1|χ_q⟩)`.
    pub fn qubit_amplitudes(&self, qubits: usize, q: usize) -> [Complex64; 2] {
        let mut amp = [Complex64::new(1.0, 0.0), Complex64::new(0.0, 0.0)];
        for g in self.preparation_gates(qubits, q) {
            let m = single_qubit_matrix(&g).expect("preparation gates act on one qubit");
            amp = [m[0][0] * amp[0] + m[0][1] * amp[1], m[1][0] * amp[0] + m[1][1] * amp[1]];
        }
        amp
    }

    /// Per-qubit expectation values `[1, ⟨X⟩, ⟨Y⟩, ⟨Z⟩]` indexed by Pauli bits `x + 2z`
    /// reordered as I, X, Z, Y.
    pub(crate) fn bloch_table(&self, qubits: usize) -> Vec<[f64; 4]> {
        (0..qubits)
            .map(|q| {
                let [a0, a1] = self.qubit_amplitudes(qubits, q);
                let c = a0.conj() * a1;
                let (bx, by, bz) = (2.0 * c.re, 2.0 * c.im, a0.norm_sqr() - a1.norm_sqr());
                // index = x | z << 1 : I=0, X=1, Z=2, Y=3
                [1.0, bx, bz, by]
            })
            .collect()
    }
}

const FRAC_1_SQRT_2: f64 = std::f64::consts::FRAC_1_SQRT_2;

pub(crate) type Mat2 = [[Complex64; 2]; 2];

fn c(re: f64, im: f64) -> Complex64 {
    Complex64::new(re, im)
}

fn rz_matrix(angle: Angle) -> Mat2 {
    let t = angle.radians() / 2.0;
    [[Complex64::cis(-t), c(0.0, 0.0)], [c(0.0, 0.0), Complex64::cis(t)]]
}

fn rx_matrix(angle: Angle) -> Mat2 {
    let t = angle.radians() / 2.0;
    let (co, si) = (t.cos(), t.sin());
    [[c(co, 0.0), c(0.0, -si)], [c(0.0, -si), c(co, 0.0)]]
}

/// Unitary of a single-qubit gate; `None` for CNOT.
pub(crate) fn single_qubit_matrix(gate: &Gate) -> Option<Mat2> {
    let o = c(0.0, 0.0);
    let l = c(1.0, 0.0);
    let h = c(FRAC_1_SQRT_2, 0.0);
    Some(match gate {
        Gate::H(_) => [[h, h], [h, -h]],
        Gate::X(_) => [[o, l], [l, o]],
        Gate::Y(_) => [[o, c(0.0, -1.0)], [c(0.0, 1.0), o]],
        Gate::Z(_) => [[l, o], [o, -l]],
        Gate::S(_) => [[l, o], [o, c(0.0, 1.0)]],
        Gate::Sdag(_) => [[l, o], [o, c(0.0, -1.0)]],
        Gate::P(_) => rx_matrix(Angle::quarter_turns(1)),
        Gate::Rz { angle, .. } => rz_matrix(*angle),
        Gate::Rx { angle, .. } => rx_matrix(*angle),
        Gate::Cnot { .. } => return None,
    })
}

/// Diagonal entries of diagonal single-qubit gates.
pub(crate) fn diagonal_entries(gate: &Gate) -> Option<[Complex64; 2]> {
    match gate {
        Gate::Z(_) | Gate::S(_) | Gate::Sdag(_) | Gate::Rz { .. } => {
            let m = single_qubit_matrix(gate)?;
            Some([m[0][0], m[1][1]])
        }
        _ => None,
    }
}

/// Which exact simulator evaluates circuits.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, Default)]
#[serde(rename_all = "kebab-case")]
pub enum ExactBackend {
    /// Statevector up to its qubit limit, Pauli propagation beyond.
    #[default]
    Auto,
    Statevector,
    PauliPropagation,
}

/// Exact per-term values with the chosen backend.
pub fn exact_terms(
    circuit: &crate::circuit::Circuit,
    obs: &crate::circuit::Observable,
    init: &StateSpec,
    backend: ExactBackend,
    limits: &SimLimits,
) -> Result<Vec<f64>> {
    match backend {
        ExactBackend::Statevector => statevector_terms(circuit, obs, init, limits),
        ExactBackend::PauliPropagation => pauli_propagation_terms(circuit, obs, init, limits.max_terms),
        ExactBackend::Auto if circuit.num_qubits() <= limits.statevector_max_qubits => {
            statevector_terms(circuit, obs, init, limits)
        }
        ExactBackend::Auto => pauli_propagation_terms(circuit, obs, init, limits.max_terms),
    }
}
