use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, Observable, Pauli, PauliString, PauliTerm};
use crate::error::{CdrError, Result};

/// Open transverse-field Ising chain `H = −g Σ X_j − Σ Z_j Z_{j+1}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IsingSpec {
    pub qubits: usize,
    #[serde(default = "default_g")]
    pub g: f64,
}

fn default_g() -> f64 {
    2.0
}

impl IsingSpec {
    pub fn new(qubits: usize, g: f64) -> Result<Self> {
        let s = IsingSpec { qubits, g };
        s.validate()?;
        Ok(s)
    }

    pub fn validate(&self) -> Result<()> {
        if !(2..=crate::circuit::MAX_QUBITS).contains(&self.qubits) {
            return Err(CdrError::Invalid(format!(
                "Ising chain needs 2..={} qubits, got {}",
                crate::circuit::MAX_QUBITS,
                self.qubits
            )));
        }
        if !self.g.is_finite() {
            return Err(CdrError::Invalid("transverse field must be finite".into()));
        }
        Ok(())
    }
}

/// Field terms `−g X_j` first, then bonds `−Z_j Z_{j+1}`.
pub fn ising_observable(spec: &IsingSpec) -> Observable {
    let q = spec.qubits;
    let fields = (0..q).map(|j| PauliTerm {
        coeff: -spec.g,
        paulis: PauliString::single(q, j, Pauli::X),
    });
    let bonds = (0..q - 1).map(|j| {
        let mut p = PauliString::single(q, j, Pauli::Z);
        p.set(j + 1, Pauli::Z);
        PauliTerm { coeff: -1.0, paulis: p }
    });
    Observable::new(fields.chain(bonds)).expect("well-formed Ising terms")
}

/// Ground energy from the free-fermion spectrum: minus the sum of the
/// singular values of the bidiagonal matrix with `g` on the diagonal and 1
/// above it.
pub fn ising_ground_energy(spec: &IsingSpec) -> f64 {
    let q = spec.qubits;
    let m = DMatrix::from_fn(q, q, |r, c| {
        if r == c {
            spec.g
        } else if c == r + 1 {
            1.0
        } else {
            0.0
        }
    });
    -m.singular_values().sum()
}

/// Variational angles, `betas[j]` for the field layer and `gammas[j]` for the bond layer.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QaoaParams {
    pub betas: Vec<f64>,
    pub gammas: Vec<f64>,
}

impl QaoaParams {
    pub fn layers(&self) -> usize {
        self.betas.len()
    }

    pub fn validate(&self) -> Result<()> {
        if self.betas.len() != self.gammas.len() {
            return Err(CdrError::Invalid(format!(
                "{} betas but {} gammas",
                self.betas.len(),
                self.gammas.len()
            )));
        }
        if self.betas.iter().chain(&self.gammas).any(|v| !v.is_finite()) {
            return Err(CdrError::Invalid("QAOA angles must be finite".into()));
        }
        Ok(())
    }

    /// Flattened `(β₁, γ₁, β₂, γ₂, …)`.
    pub fn to_vec(&self) -> Vec<f64> {
        self.betas.iter().zip(&self.gammas).flat_map(|(b, g)| [*b, *g]).collect()
    }

    pub fn from_slice(v: &[f64]) -> Self {
        QaoaParams {
            betas: v.iter().step_by(2).copied().collect(),
            gammas: v.iter().skip(1).step_by(2).copied().collect(),
        }
    }
}

/// `Π_j e^{iβ_j H₂} e^{iγ_j H₁} |+⟩^{⊗Q}` with `H₁ = −Σ ZZ`, `H₂ = −g Σ X`.
///
/// Each bond factor `e^{−iγ Z_j Z_{j+1}}` is `CNOT·RZ_{j+1}(2γ)·CNOT`; each
/// field factor `e^{−iβg X_j}` is `H·RZ(2βg)·H`. A layer therefore holds
/// `2Q−1` rotations and `2Q−2` CNOTs.
pub fn build_qaoa_circuit(spec: &IsingSpec, params: &QaoaParams) -> Result<Circuit> {
    spec.validate()?;
    params.validate()?;
    let q = spec.qubits;
    let mut c = Circuit::new(q)?;
    for j in 0..q {
        c.push(Gate::H(j))?;
    }
    for (beta, gamma) in params.betas.iter().zip(&params.gammas) {
        for j in 0..q - 1 {
            c.push(Gate::cnot(j, j + 1))?;
            c.push(Gate::rz(j + 1, 2.0 * gamma))?;
            c.push(Gate::cnot(j, j + 1))?;
        }
        for j in 0..q {
            c.push(Gate::H(j))?;
            c.push(Gate::rz(j, 2.0 * beta * spec.g))?;
            c.push(Gate::H(j))?;
        }
    }
    Ok(c)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::circuit::GateKind;

    #[test]
    fn observable_terms() {
        let obs = ising_observable(&IsingSpec::new(2, 2.0).unwrap());
        let got: Vec<(f64, String)> = obs.terms().iter().map(|t| (t.coeff, t.paulis.to_string())).collect();
        assert_eq!(
            got,
            vec![(-2.0, "XI".into()), (-2.0, "IX".into()), (-1.0, "ZZ".into())]
        );
        for q in [3, 8, 17] {
            let obs = ising_observable(&IsingSpec::new(q, 2.0).unwrap());
            assert_eq!(obs.len(), 2 * q - 1);
            assert!(obs.terms().iter().all(|t| t.coeff < 0.0));
        }
    }

    #[test]
    fn two_site_ground_energy() {
        for g in [0.5, 1.0, 2.0] {
            let e = ising_ground_energy(&IsingSpec::new(2, g).unwrap());
            assert!((e + (1.0 + 4.0 * g * g).sqrt()).abs() < 1e-12);
        }
    }

    #[test]
    fn gate_counts() {
        let params = |p: usize| QaoaParams {
            betas: vec![0.3; p],
            gammas: vec![0.2; p],
        };
        let c = build_qaoa_circuit(&IsingSpec::new(4, 2.0).unwrap(), &params(1)).unwrap();
        assert_eq!((c.count(GateKind::Rz), c.count(GateKind::Cnot)), (7, 6));
        let c = build_qaoa_circuit(&IsingSpec::new(16, 2.0).unwrap(), &params(2)).unwrap();
        assert_eq!((c.count(GateKind::Rz), c.count(GateKind::Cnot)), (62, 60));
        let c = build_qaoa_circuit(&IsingSpec::new(5, 2.0).unwrap(), &params(0)).unwrap();
        assert_eq!(c.len(), 5);
        assert!(build_qaoa_circuit(
            &IsingSpec::new(3, 2.0).unwrap(),
            &QaoaParams {
                betas: vec![0.1],
                gammas: vec![]
            }
        )
        .is_err());
    }
}
