use num_complex::Complex64;

use super::NoiseModel;
use crate::circuit::{Circuit, Gate, Observable, PauliString};
use crate::error::{CdrError, Result};
use crate::sim_exact::{diagonal_entries, single_qubit_matrix, Mat2, SimLimits, StateSpec};

/// Indices below `len` with every bit of `mask` clear, in increasing order.
fn zero_bits(len: usize, mask: usize) -> impl Iterator<Item = usize> {
    std::iter::successors(Some(0usize), move |&i| Some(((i | mask) + 1) & !mask)).take_while(move |&i| i < len)
}

/// Density matrix stored row-major; entry `(r, c)` lives at `r << Q | c`,
/// so row qubit `q` is bit `q + Q` and column qubit `q` is bit `q`.
#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    qubits: usize,
    rho: Vec<Complex64>,
}

impl DensityMatrix {
    pub fn new(qubits: usize, init: &StateSpec, limits: &SimLimits) -> Result<Self> {
        if qubits > limits.density_max_qubits {
            return Err(CdrError::Capacity(format!(
                "density matrix limited to {} qubits, circuit has {qubits}",
                limits.density_max_qubits
            )));
        }
        init.validate(qubits)?;
        let mut psi = vec![Complex64::new(1.0, 0.0)];
        for q in 0..qubits {
            let [a0, a1] = init.qubit_amplitudes(qubits, q);
            psi = psi.iter().map(|&a| a * a0).chain(psi.iter().map(|&a| a * a1)).collect();
        }
        let d = 1usize << qubits;
        let mut rho = vec![Complex64::new(0.0, 0.0); d * d];
        for r in 0..d {
            for c in 0..d {
                rho[(r << qubits) | c] = psi[r] * psi[c].conj();
            }
        }
        Ok(DensityMatrix { qubits, rho })
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits
    }

    pub fn dim(&self) -> usize {
        1 << self.qubits
    }

    pub fn get(&self, r: usize, c: usize) -> Complex64 {
        self.rho[(r << self.qubits) | c]
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim()).map(|i| self.get(i, i)).sum()
    }

    fn row_bit(&self, q: usize) -> usize {
        1 << (q + self.qubits)
    }

    fn col_bit(q: usize) -> usize {
        1 << q
    }

    fn apply_pairs(&mut self, bit: usize, m: &Mat2) {
        for i in zero_bits(self.rho.len(), bit) {
            let (a, b) = (self.rho[i], self.rho[i | bit]);
            self.rho[i] = m[0][0] * a + m[0][1] * b;
            self.rho[i | bit] = m[1][0] * a + m[1][1] * b;
        }
    }

    pub fn apply_unitary(&mut self, gate: &Gate) {
        match *gate {
            Gate::Cnot { control, target } => {
                let n = self.qubits;
                for (cb, tb) in [(1 << (control + n), 1 << (target + n)), (1 << control, 1 << target)] {
                    for i in zero_bits(self.rho.len(), cb | tb) {
                        self.rho.swap(i | cb, i | cb | tb);
                    }
                }
            }
            _ => {
                let q = gate.qubits()[0];
                let (rb, cb) = (self.row_bit(q), Self::col_bit(q));
                if let Some([d0, d1]) = diagonal_entries(gate) {
                    // entries diagonal in qubit q pick up |d|² = 1
                    let (f10, f01) = (d1 * d0.conj(), d0 * d1.conj());
                    for i in zero_bits(self.rho.len(), rb | cb) {
                        self.rho[i | rb] *= f10;
                        self.rho[i | cb] *= f01;
                    }
                } else {
                    let m = single_qubit_matrix(gate).expect("single-qubit gate");
                    let conj = [[m[0][0].conj(), m[0][1].conj()], [m[1][0].conj(), m[1][1].conj()]];
                    self.apply_pairs(rb, &m);
                    self.apply_pairs(cb, &conj);
                }
            }
        }
    }

    /// `ρ → (1−p)ρ + p/3 (XρX + YρY + ZρZ)` on qubit `q`.
    pub fn depolarize_1(&mut self, q: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let (rb, cb) = (self.row_bit(q), Self::col_bit(q));
        let off = 1.0 - 4.0 * p / 3.0;
        let (stay, move_) = (1.0 - 2.0 * p / 3.0, 2.0 * p / 3.0);
        for i in zero_bits(self.rho.len(), rb | cb) {
            let (a, d) = (self.rho[i], self.rho[i | rb | cb]);
            self.rho[i] = a * stay + d * move_;
            self.rho[i | rb | cb] = d * stay + a * move_;
            self.rho[i | rb] *= off;
            self.rho[i | cb] *= off;
        }
    }

    /// `ρ → (1−p)ρ + p/15 Σ_{P≠I} PρP` on qubits `a`, `b`.
    pub fn depolarize_2(&mut self, a: usize, b: usize, p: f64) {
        if p == 0.0 {
            return;
        }
        let (ra, rb, ca, cb) = (self.row_bit(a), self.row_bit(b), Self::col_bit(a), Self::col_bit(b));
        let mask = ra | rb | ca | cb;
        let keep = 1.0 - 16.0 * p / 15.0;
        let spread = 4.0 * p / 15.0;
        let diag = [0, ra | ca, rb | cb, ra | rb | ca | cb];
        for i in zero_bits(self.rho.len(), mask) {
            let partial: Complex64 = diag.iter().map(|&o| self.rho[i | o]).sum();
            for sub in [0, ra, rb, ca, cb, ra | rb, ra | ca, ra | cb, rb | ca, rb | cb, ca | cb, ra | rb | ca, ra | rb | cb, ra | ca | cb, rb | ca | cb, mask] {
                self.rho[i | sub] *= keep;
            }
            for &o in &diag {
                self.rho[i | o] += partial * spread;
            }
        }
    }

    /// `α·AD_γ(ρ) + (1−α)ρ` on qubit `q`.
    pub fn amplitude_damp(&mut self, q: usize, gamma: f64, alpha: f64) {
        if gamma == 0.0 || alpha == 0.0 {
            return;
        }
        let (rb, cb) = (self.row_bit(q), Self::col_bit(q));
        let flow = alpha * gamma;
        let off = alpha * (1.0 - gamma).sqrt() + (1.0 - alpha);
        for i in zero_bits(self.rho.len(), rb | cb) {
            let d = self.rho[i | rb | cb];
            self.rho[i] += d * flow;
            self.rho[i | rb | cb] = d * (1.0 - flow);
            self.rho[i | rb] *= off;
            self.rho[i | cb] *= off;
        }
    }

    /// `ρ → (1−p)ρ + p·1/d`.
    pub fn depolarize_global(&mut self, p: f64) {
        if p == 0.0 {
            return;
        }
        let d = self.dim();
        let tr = self.trace();
        for v in &mut self.rho {
            *v *= 1.0 - p;
        }
        for i in 0..d {
            self.rho[(i << self.qubits) | i] += tr * (p / d as f64);
        }
    }

    fn apply_gate_noise(&mut self, gate: &Gate, noise: &NoiseModel) {
        let (gamma, alpha) = (noise.scaled_gamma(), noise.mix_alpha);
        match *gate {
            Gate::Cnot { control, target } => {
                self.depolarize_2(control, target, noise.eff_p2());
                self.amplitude_damp(control, gamma, alpha);
                self.amplitude_damp(target, gamma, alpha);
            }
            _ => {
                let q = gate.qubits()[0];
                self.depolarize_1(q, noise.eff_p1());
                self.amplitude_damp(q, gamma, alpha);
            }
        }
    }

    /// Evolve through `circuit`, each gate followed by its noise.
    pub fn run(&mut self, circuit: &Circuit, noise: &NoiseModel) {
        let gates = circuit.gates();
        let mut fires = vec![0usize; gates.len().max(1)];
        if noise.eff_p_global() > 0.0 {
            for pos in noise.global_positions(gates.len()) {
                fires[pos] += 1;
            }
        }
        for (i, g) in gates.iter().enumerate() {
            self.apply_unitary(g);
            self.apply_gate_noise(g, noise);
            for _ in 0..fires[i] {
                self.depolarize_global(noise.eff_p_global());
            }
        }
        if gates.is_empty() {
            for _ in 0..fires[0] {
                self.depolarize_global(noise.eff_p_global());
            }
        }
    }

    /// `Tr(ρP)` for a Hermitian Pauli string.
    pub fn pauli_expectation(&self, p: &PauliString) -> f64 {
        let ny = (p.x & p.z).count_ones();
        let phase = Complex64::i().powu(ny);
        let x = p.x as usize;
        let mut acc = Complex64::new(0.0, 0.0);
        for i in 0..self.dim() {
            let sign = if (i as u64 & p.z).count_ones() % 2 == 1 { -1.0 } else { 1.0 };
            acc += self.get(i, i ^ x) * sign;
        }
        (acc * phase).re
    }

    /// Hermitian matrix as an nalgebra value, for spectral checks.
    pub fn to_matrix(&self) -> nalgebra::DMatrix<Complex64> {
        let d = self.dim();
        nalgebra::DMatrix::from_fn(d, d, |r, c| self.get(r, c))
    }
}

pub fn density_matrix_terms(
    circuit: &Circuit,
    obs: &Observable,
    init: &StateSpec,
    noise: &NoiseModel,
    limits: &SimLimits,
) -> Result<Vec<f64>> {
    noise.validate()?;
    obs.check_width(circuit.num_qubits())?;
    let mut dm = DensityMatrix::new(circuit.num_qubits(), init, limits)?;
    dm.run(circuit, noise);
    Ok(obs.terms().iter().map(|t| dm.pauli_expectation(&t.paulis)).collect())
}

pub fn density_matrix_expectation(
    circuit: &Circuit,
    obs: &Observable,
    init: &StateSpec,
    noise: &NoiseModel,
    limits: &SimLimits,
) -> Result<f64> {
    Ok(obs.combine(&density_matrix_terms(circuit, obs, init, noise, limits)?))
}
