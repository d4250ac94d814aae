use num_complex::Complex64;

use super::{diagonal_entries, single_qubit_matrix, Mat2, SimLimits, StateSpec};
use crate::circuit::{Circuit, Gate, Observable, PauliString};
use crate::error::{CdrError, Result};

/// Dense state vector; bit `q` of a basis index is qubit `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct StateVector {
    qubits: usize,
    amps: Vec<Complex64>,
}

impl StateVector {
    pub fn new(qubits: usize, init: &StateSpec, limits: &SimLimits) -> Result<Self> {
        if qubits > limits.statevector_max_qubits {
            return Err(CdrError::Capacity(format!(
                "state vector limited to {} qubits, circuit has {qubits}",
                limits.statevector_max_qubits
            )));
        }
        init.validate(qubits)?;
        let mut amps = vec![Complex64::new(1.0, 0.0)];
        for q in 0..qubits {
            let [a0, a1] = init.qubit_amplitudes(qubits, q);
            let mut next = vec![Complex64::new(0.0, 0.0); amps.len() * 2];
            let bit = 1 << q;
            for (i, &a) in amps.iter().enumerate() {
                next[i] = a * a0;
                next[i | bit] = a * a1;
            }
            amps = next;
        }
        Ok(StateVector { qubits, amps })
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits
    }

    pub fn amplitudes(&self) -> &[Complex64] {
        &self.amps
    }

    pub fn amplitudes_mut(&mut self) -> &mut [Complex64] {
        &mut self.amps
    }

    pub fn apply_circuit(&mut self, circuit: &Circuit) {
        for g in circuit.gates() {
            self.apply(g);
        }
    }

    pub fn apply(&mut self, gate: &Gate) {
        match *gate {
            Gate::Cnot { control, target } => self.apply_cnot(control, target),
            Gate::X(q) => {
                let bit = 1 << q;
                for i in 0..self.amps.len() {
                    if i & bit == 0 {
                        self.amps.swap(i, i | bit);
                    }
                }
            }
            _ => {
                let q = gate.qubits()[0];
                if let Some(d) = diagonal_entries(gate) {
                    self.apply_diagonal(q, d);
                } else {
                    let m = single_qubit_matrix(gate).expect("single-qubit gate");
                    self.apply_matrix(q, &m);
                }
            }
        }
    }

    pub(crate) fn apply_matrix(&mut self, q: usize, m: &Mat2) {
        let bit = 1 << q;
        for i in 0..self.amps.len() {
            if i & bit == 0 {
                let (a, b) = (self.amps[i], self.amps[i | bit]);
                self.amps[i] = m[0][0] * a + m[0][1] * b;
                self.amps[i | bit] = m[1][0] * a + m[1][1] * b;
            }
        }
    }

    pub(crate) fn apply_diagonal(&mut self, q: usize, d: [Complex64; 2]) {
        let bit = 1 << q;
        for (i, a) in self.amps.iter_mut().enumerate() {
            *a *= if i & bit == 0 { d[0] } else { d[1] };
        }
    }

    pub(crate) fn apply_cnot(&mut self, control: usize, target: usize) {
        let (cb, tb) = (1 << control, 1 << target);
        for i in 0..self.amps.len() {
            if i & cb != 0 && i & tb == 0 {
                self.amps.swap(i, i | tb);
            }
        }
    }

    /// Apply a Pauli string as an operator (including the phase of Y letters).
    pub fn apply_pauli(&mut self, p: &PauliString) {
        let mut out = vec![Complex64::new(0.0, 0.0); self.amps.len()];
        let ny = (p.x & p.z).count_ones();
        let base = Complex64::i().powu(ny);
        for (i, &a) in self.amps.iter().enumerate() {
            let sign = if (i as u64 & p.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            out[i ^ p.x as usize] = a * base * sign;
        }
        self.amps = out;
    }

    pub fn norm_sqr(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum()
    }

    pub fn normalize(&mut self) {
        let n = self.norm_sqr().sqrt();
        if n > 0.0 {
            for a in &mut self.amps {
                *a /= n;
            }
        }
    }

    /// `⟨ψ|P|ψ⟩` for a Hermitian Pauli string.
    pub fn pauli_expectation(&self, p: &PauliString) -> f64 {
        let ny = (p.x & p.z).count_ones();
        let phase = Complex64::i().powu(ny);
        let mut acc = Complex64::new(0.0, 0.0);
        for (i, &a) in self.amps.iter().enumerate() {
            let sign = if (i as u64 & p.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            acc += self.amps[i ^ p.x as usize].conj() * a * sign;
        }
        (acc * phase).re
    }

    pub fn term_expectations(&self, obs: &Observable) -> Vec<f64> {
        obs.terms().iter().map(|t| self.pauli_expectation(&t.paulis)).collect()
    }
}

/// Per-term values `⟨init|U† P_k U|init⟩` by dense evolution.
pub fn statevector_terms(circuit: &Circuit, obs: &Observable, init: &StateSpec, limits: &SimLimits) -> Result<Vec<f64>> {
    obs.check_width(circuit.num_qubits())?;
    let mut sv = StateVector::new(circuit.num_qubits(), init, limits)?;
    sv.apply_circuit(circuit);
    Ok(sv.term_expectations(obs))
}

pub fn statevector_expectation(circuit: &Circuit, obs: &Observable, init: &StateSpec, limits: &SimLimits) -> Result<f64> {
    Ok(obs.combine(&statevector_terms(circuit, obs, init, limits)?))
}
