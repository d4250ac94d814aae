use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::circuit::{Circuit, Gate, Observable, Pauli, PauliString, PauliTerm};
use crate::error::{CdrError, Result};
use crate::sim_exact::{SimLimits, StateSpec, StateVector};

/// Phase-estimation workload: a diagonal Hamiltonian on the system
/// register, a product input state, a time grid and spectral bins.
///
/// The ancilla is qubit 0 and system qubit `i` is register qubit `i + 1`.
/// `input_angles` holds `(a, b)` per system qubit, preparing
/// `RZ(b)·P·RZ(a)·H|0⟩`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct QpeSpec {
    #[serde(default = "default_hamiltonian")]
    pub hamiltonian: Observable,
    pub input_angles: Vec<f64>,
    #[serde(default = "default_times")]
    pub times: Vec<f64>,
    #[serde(default = "default_bins")]
    pub bin_centers: Vec<f64>,
    #[serde(default = "default_halfwidth")]
    pub bin_halfwidth: f64,
    /// Frequencies per bin in the spectral fit, at the midpoints of equal sub-cells.
    #[serde(default = "default_subdivisions")]
    pub bin_subdivisions: usize,
}

/// `(Z₁Z₂ + Z₁Z₃ + Z₂Z₃)/6` on three qubits.
pub fn default_hamiltonian() -> Observable {
    Observable::new(["ZZI", "ZIZ", "IZZ"].map(|s| PauliTerm {
        coeff: 1.0 / 6.0,
        paulis: PauliString::parse(s).expect("valid literal"),
    }))
    .expect("valid Hamiltonian")
}

fn default_times() -> Vec<f64> {
    (1..=136).map(f64::from).collect()
}

fn default_bins() -> Vec<f64> {
    (0..9).map(|j| -0.5 + 0.125 * f64::from(j)).collect()
}

fn default_halfwidth() -> f64 {
    0.0625
}

fn default_subdivisions() -> usize {
    3
}

impl QpeSpec {
    pub fn new(input_angles: Vec<f64>) -> Self {
        QpeSpec {
            hamiltonian: default_hamiltonian(),
            input_angles,
            times: default_times(),
            bin_centers: default_bins(),
            bin_halfwidth: default_halfwidth(),
            bin_subdivisions: default_subdivisions(),
        }
    }

    pub fn system_qubits(&self) -> usize {
        self.hamiltonian.width().unwrap_or(0)
    }

    pub fn validate(&self) -> Result<()> {
        let n = self.system_qubits();
        if n == 0 || n + 1 > crate::circuit::MAX_QUBITS {
            return Err(CdrError::Invalid("QPE Hamiltonian must act on at least one qubit".into()));
        }
        if self.hamiltonian.terms().iter().any(|t| t.paulis.x != 0) {
            return Err(CdrError::Invalid("QPE Hamiltonian terms must be products of Z".into()));
        }
        if self.input_angles.len() != 2 * n {
            return Err(CdrError::Invalid(format!(
                "input state needs {} angles, got {}",
                2 * n,
                self.input_angles.len()
            )));
        }
        if self.times.is_empty() || self.bin_centers.is_empty() || self.bin_subdivisions == 0 {
            return Err(CdrError::Invalid("times, bins and bin subdivisions must be non-empty".into()));
        }
        if !(self.bin_halfwidth > 0.0) {
            return Err(CdrError::Invalid("bin halfwidth must be positive".into()));
        }
        Ok(())
    }

    /// Input state of the system register for the reference simulators.
    pub fn system_state(&self) -> StateSpec {
        StateSpec::ProductRotations {
            angles: self.input_angles.clone(),
        }
    }
}

/// Z on the ancilla of a `qubits`-wide register.
pub fn ancilla_observable(qubits: usize) -> Observable {
    Observable::single(1.0, PauliString::single(qubits, 0, Pauli::Z))
}

/// Hadamard-test circuits whose ancilla `⟨Z⟩` equals `Re g(t)` and
/// `Im g(t)` for `g(t) = ⟨χ|e^{−iHt}|χ⟩`.
///
/// Every term `c·Z_S` becomes a controlled `e^{−ictZ_S}`: a CNOT ladder
/// gathers the parity of `S` on its last qubit `j`, and the controlled
/// `RZ_j(2ct)` is `RZ_j(ct)·CNOT(a,j)·RZ_j(−ct)·CNOT(a,j)`.
pub fn build_qpe_circuits(spec: &QpeSpec, t: f64) -> Result<(Circuit, Circuit)> {
    spec.validate()?;
    let n = spec.system_qubits();
    let mut c = Circuit::new(n + 1)?;
    c.push(Gate::H(0))?;
    for i in 0..n {
        let q = i + 1;
        c.push(Gate::H(q))?;
        c.push(Gate::rz(q, spec.input_angles[2 * i]))?;
        c.push(Gate::P(q))?;
        c.push(Gate::rz(q, spec.input_angles[2 * i + 1]))?;
    }
    for term in spec.hamiltonian.terms() {
        let theta = term.coeff * t;
        let support: Vec<usize> = (0..n).filter(|&i| term.paulis.z >> i & 1 == 1).map(|i| i + 1).collect();
        let Some((&last, rest)) = support.split_last() else {
            // identity term: a controlled global phase is RZ on the ancilla up to phase
            c.push(Gate::rz(0, theta))?;
            continue;
        };
        for &q in rest {
            c.push(Gate::cnot(q, last))?;
        }
        c.push(Gate::rz(last, theta))?;
        c.push(Gate::cnot(0, last))?;
        c.push(Gate::rz(last, -theta))?;
        c.push(Gate::cnot(0, last))?;
        for &q in rest.iter().rev() {
            c.push(Gate::cnot(q, last))?;
        }
    }
    let mut re = c.clone();
    re.push(Gate::H(0))?;
    let mut im = c;
    im.push(Gate::Sdag(0))?;
    im.push(Gate::H(0))?;
    Ok((re, im))
}

/// Reference series by dense evolution of the system register.
pub fn exact_series(spec: &QpeSpec, limits: &SimLimits) -> Result<Vec<Complex64>> {
    spec.validate()?;
    let n = spec.system_qubits();
    let sv = StateVector::new(n, &spec.system_state(), limits)?;
    let energies = diagonal_energies(&spec.hamiltonian, n);
    Ok(spec
        .times
        .iter()
        .map(|&t| {
            sv.amplitudes()
                .iter()
                .zip(&energies)
                .map(|(a, e)| a.norm_sqr() * Complex64::cis(-e * t))
                .sum()
        })
        .collect())
}

fn diagonal_energies(h: &Observable, n: usize) -> Vec<f64> {
    (0..1usize << n)
        .map(|b| {
            h.terms()
                .iter()
                .map(|t| {
                    let parity = (b as u64 & t.paulis.z).count_ones() % 2;
                    if parity == 1 {
                        -t.coeff
                    } else {
                        t.coeff
                    }
                })
                .sum()
        })
        .collect()
}

/// Eigenstate weights of the input state summed per bin `|λ − λ̃_j| ≤ ε`.
pub fn binned_eigen_weights(spec: &QpeSpec, limits: &SimLimits) -> Result<Vec<f64>> {
    spec.validate()?;
    let n = spec.system_qubits();
    let sv = StateVector::new(n, &spec.system_state(), limits)?;
    let energies = diagonal_energies(&spec.hamiltonian, n);
    let mut q = vec![0.0; spec.bin_centers.len()];
    for (a, e) in sv.amplitudes().iter().zip(&energies) {
        if let Some(j) = spec
            .bin_centers
            .iter()
            .position(|c| (e - c).abs() <= spec.bin_halfwidth + 1e-12)
        {
            q[j] += a.norm_sqr();
        }
    }
    Ok(q)
}

/// Non-negative least squares `min ‖Ax − b‖, x ≥ 0` (Lawson–Hanson).
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>) -> DVector<f64> {
    let n = a.ncols();
    let mut x = DVector::zeros(n);
    let mut passive = vec![false; n];
    let tol = 1e-12 * a.norm().max(1.0) * b.norm().max(1.0);
    let solve_passive = |passive: &[bool]| -> DVector<f64> {
        let idx: Vec<usize> = (0..n).filter(|&j| passive[j]).collect();
        let sub = DMatrix::from_fn(a.nrows(), idx.len(), |r, c| a[(r, idx[c])]);
        let sol = sub
            .svd(true, true)
            .solve(b, 1e-14)
            .expect("SVD with both factors");
        let mut z = DVector::zeros(n);
        for (k, &j) in idx.iter().enumerate() {
            z[j] = sol[k];
        }
        z
    };
    for _ in 0..3 * n + 10 {
        let w = a.transpose() * (b - a * &x);
        let candidate = (0..n).filter(|&j| !passive[j] && w[j] > tol).max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(j) = candidate else { break };
        passive[j] = true;
        loop {
            let z = solve_passive(&passive);
            if (0..n).filter(|&k| passive[k]).all(|k| z[k] > 0.0) {
                x = z;
                break;
            }
            let mut alpha = f64::INFINITY;
            for k in (0..n).filter(|&k| passive[k] && z[k] <= 0.0) {
                alpha = alpha.min(x[k] / (x[k] - z[k]));
            }
            x += (z - &x) * alpha;
            for k in 0..n {
                if passive[k] && x[k] <= 1e-15 {
                    passive[k] = false;
                    x[k] = 0.0;
                }
            }
        }
    }
    x
}

/// Bin weights `q_j ≥ 0` with `Σq_j ≤ 1` fitting `g(t) ≈ Σ_j q_j e^{−iλ̃_j t}`.
///
/// Each bin contributes `bin_subdivisions` frequencies spread evenly over
/// `[λ̃_j − ε, λ̃_j + ε]`; `q_j` is the sum of their non-negative amplitudes,
/// so eigenvalues away from a bin centre still land in their own bin.
pub fn spectral_decomposition(series: &[Complex64], spec: &QpeSpec) -> Result<Vec<f64>> {
    spec.validate()?;
    if series.len() != spec.times.len() {
        return Err(CdrError::Invalid(format!(
            "series has {} points for {} times",
            series.len(),
            spec.times.len()
        )));
    }
    let s = spec.bin_subdivisions;
    let cell = 2.0 * spec.bin_halfwidth / s as f64;
    let freqs: Vec<f64> = spec
        .bin_centers
        .iter()
        .flat_map(|c| (0..s).map(move |k| c - spec.bin_halfwidth + (k as f64 + 0.5) * cell))
        .collect();
    let (nt, nf) = (spec.times.len(), freqs.len());
    let a = DMatrix::from_fn(2 * nt, nf, |r, j| {
        let phase = -freqs[j] * spec.times[r % nt];
        if r < nt {
            phase.cos()
        } else {
            phase.sin()
        }
    });
    let eig = (a.transpose() * &a).symmetric_eigenvalues();
    let (lo, hi) = eig.iter().fold((f64::INFINITY, 0.0f64), |(l, h), &e| (l.min(e), h.max(e)));
    if !(lo > 1e-12 * hi) {
        return Err(CdrError::Degenerate(format!(
            "spectral design is ill-conditioned (eigenvalue ratio {:.3e})",
            lo / hi
        )));
    }
    let b = DVector::from_iterator(2 * nt, series.iter().map(|g| g.re).chain(series.iter().map(|g| g.im)));
    let mut w = nnls(&a, &b);
    if w.sum() > 1.0 + 1e-9 {
        // enforce Σq = 1 by a heavily weighted extra row
        let scale = 1e4 * hi.sqrt();
        let mut a2 = a.insert_row(2 * nt, scale);
        let mut b2 = b.insert_row(2 * nt, scale);
        a2.row_mut(2 * nt).fill(scale);
        b2[2 * nt] = scale;
        w = nnls(&a2, &b2);
    }
    Ok(w.as_slice().chunks(s).map(|c| c.iter().sum()).collect())
}

/// `‖q_est − q_ref‖₁ / ‖q_ref‖₁`.
pub fn qpe_relative_error(q_est: &[f64], q_ref: &[f64]) -> Result<f64> {
    if q_est.len() != q_ref.len() {
        return Err(CdrError::Invalid("weight vectors differ in length".into()));
    }
    let norm: f64 = q_ref.iter().map(|v| v.abs()).sum();
    if norm == 0.0 {
        return Err(CdrError::Domain("reference weights are all zero".into()));
    }
    Ok(q_est.iter().zip(q_ref).map(|(a, b)| (a - b).abs()).sum::<f64>() / norm)
}
