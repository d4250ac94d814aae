use super::conjugation::heisenberg_clifford;
use super::StateSpec;
use crate::circuit::{Circuit, Gate, Observable};
use crate::error::{CdrError, Result};

const PRUNE: f64 = 1e-14;

/// Heisenberg-evolved observable: a set of distinct Pauli strings, each with
/// one coefficient per original observable term.
#[derive(Debug, Clone)]
pub struct PauliFrontier {
    keys: Vec<(u64, u64)>,
    coeffs: Vec<f64>,
    columns: usize,
}

impl PauliFrontier {
    pub fn from_observable(obs: &Observable) -> Self {
        let columns = obs.len();
        let mut f = PauliFrontier {
            keys: Vec::with_capacity(columns),
            coeffs: Vec::with_capacity(columns * columns),
            columns,
        };
        for (k, t) in obs.terms().iter().enumerate() {
            f.keys.push((t.paulis.x, t.paulis.z));
            f.coeffs.extend((0..columns).map(|j| if j == k { 1.0 } else { 0.0 }));
        }
        f.normalize();
        f
    }

    pub fn len(&self) -> usize {
        self.keys.len()
    }

    pub fn is_empty(&self) -> bool {
        self.keys.is_empty()
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.coeffs[i * self.columns..(i + 1) * self.columns]
    }

    fn row_mut(&mut self, i: usize) -> &mut [f64] {
        &mut self.coeffs[i * self.columns..(i + 1) * self.columns]
    }

    /// Replace every string by `U† P U`.
    pub fn apply_heisenberg(&mut self, gate: &Gate) {
        if gate.is_clifford() {
            for i in 0..self.keys.len() {
                let (x, z) = self.keys[i];
                let (x2, z2, negate) = heisenberg_clifford(gate, x, z).expect("Clifford gate");
                self.keys[i] = (x2, z2);
                if negate {
                    self.row_mut(i).iter_mut().for_each(|c| *c = -*c);
                }
            }
            return;
        }
        let (qubit, angle, about_z) = match *gate {
            Gate::Rz { qubit, angle } => (qubit, angle, true),
            Gate::Rx { qubit, angle } => (qubit, angle, false),
            _ => unreachable!("fixed gates are Clifford"),
        };
        let (cos, sin) = angle.cos_sin();
        let b = 1u64 << qubit;
        let n = self.keys.len();
        for i in 0..n {
            let (x, z) = self.keys[i];
            // RZ: X → cX − sY, Y → cY + sX. RX: Z → cZ + sY, Y → cY − sZ.
            let (partner, factor) = if about_z {
                if x & b == 0 {
                    continue;
                }
                ((x, z ^ b), if z & b == 0 { -sin } else { sin })
            } else {
                if z & b == 0 {
                    continue;
                }
                ((x ^ b, z), if x & b == 0 { sin } else { -sin })
            };
            self.keys.push(partner);
            for j in 0..self.columns {
                let v = self.coeffs[i * self.columns + j];
                self.coeffs.push(v * factor);
                self.coeffs[i * self.columns + j] = v * cos;
            }
        }
        self.normalize();
    }

    /// Sort by string, merge duplicates and drop negligible rows.
    fn normalize(&mut self) {
        let mut order: Vec<usize> = (0..self.keys.len()).collect();
        order.sort_unstable_by_key(|&i| self.keys[i]);
        let mut keys = Vec::with_capacity(self.keys.len());
        let mut coeffs: Vec<f64> = Vec::with_capacity(self.coeffs.len());
        let cols = self.columns;
        for &i in &order {
            let src = self.row(i);
            if keys.last() == Some(&self.keys[i]) {
                let start = coeffs.len() - cols;
                for (d, s) in coeffs[start..].iter_mut().zip(src) {
                    *d += s;
                }
            } else {
                if let Some(start) = coeffs.len().checked_sub(cols) {
                    if !keys.is_empty() && coeffs[start..].iter().all(|c| c.abs() < PRUNE) {
                        keys.pop();
                        coeffs.truncate(start);
                    }
                }
                keys.push(self.keys[i]);
                coeffs.extend_from_slice(src);
            }
        }
        if let Some(start) = coeffs.len().checked_sub(cols) {
            if !keys.is_empty() && coeffs[start..].iter().all(|c| c.abs() < PRUNE) {
                keys.pop();
                coeffs.truncate(start);
            }
        }
        self.keys = keys;
        self.coeffs = coeffs;
    }

    /// Per-term expectation values in the product state `init`.
    pub fn evaluate(&self, init: &StateSpec, qubits: usize) -> Vec<f64> {
        let mut out = vec![0.0; self.columns];
        let table = match init {
            StateSpec::ProductRotations { .. } => Some(init.bloch_table(qubits)),
            _ => None,
        };
        for (i, &(x, z)) in self.keys.iter().enumerate() {
            let v = match (init, &table) {
                (StateSpec::AllZero, _) => f64::from(u8::from(x == 0)),
                (StateSpec::AllPlus, _) => f64::from(u8::from(z == 0)),
                (_, Some(t)) => {
                    let mut v = 1.0;
                    let mut support = x | z;
                    while support != 0 && v != 0.0 {
                        let q = support.trailing_zeros() as usize;
                        let idx = ((x >> q) & 1) | (((z >> q) & 1) << 1);
                        v *= t[q][idx as usize];
                        support &= support - 1;
                    }
                    v
                }
                _ => unreachable!(),
            };
            if v != 0.0 {
                for (o, c) in out.iter_mut().zip(self.row(i)) {
                    *o += v * c;
                }
            }
        }
        out
    }
}

/// Per-term values `⟨init|U† P_k U|init⟩` by Heisenberg propagation.
///
/// Fails with a capacity error naming the gate at which the number of tracked
/// strings exceeds `max_terms`.
pub fn pauli_propagation_terms(circuit: &Circuit, obs: &Observable, init: &StateSpec, max_terms: usize) -> Result<Vec<f64>> {
    obs.check_width(circuit.num_qubits())?;
    init.validate(circuit.num_qubits())?;
    let mut f = PauliFrontier::from_observable(obs);
    for (i, g) in circuit.gates().iter().enumerate().rev() {
        f.apply_heisenberg(g);
        if f.len() > max_terms {
            return Err(CdrError::Capacity(format!(
                "Pauli frontier reached {} strings (limit {max_terms}) at gate {i} ({g})",
                f.len()
            )));
        }
    }
    Ok(f.evaluate(init, circuit.num_qubits()))
}

pub fn pauli_propagation_expectation(circuit: &Circuit, obs: &Observable, init: &StateSpec, max_terms: usize) -> Result<f64> {
    Ok(obs.combine(&pauli_propagation_terms(circuit, obs, init, max_terms)?))
}
