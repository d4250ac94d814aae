use cdrkit::sim_exact::{SimLimits, StateSpec, StateVector};
use cdrkit::workloads::{ising_observable, IsingSpec, QaoaParams};
use cdrkit::{Circuit, Observable, PauliString};
use nalgebra::DMatrix;
use num_complex::Complex64;

pub type CMat = DMatrix<Complex64>;

pub const I: Complex64 = Complex64::new(0.0, 1.0);

/// Dense matrix of a Pauli string, built letter by letter from its action on basis states.
pub fn dense_pauli(p: &PauliString) -> CMat {
    let d = 1usize << p.len;
    let mut m = CMat::zeros(d, d);
    for col in 0..d {
        let mut row = col;
        let mut amp = Complex64::new(1.0, 0.0);
        for q in 0..p.len {
            let b = (col >> q) & 1;
            let letter = p.to_string().chars().nth(q).unwrap();
            match letter {
                'X' => row ^= 1 << q,
                'Y' => {
                    row ^= 1 << q;
                    amp *= if b == 0 { I } else { -I };
                }
                'Z' => {
                    if b == 1 {
                        amp = -amp;
                    }
                }
                _ => {}
            }
        }
        m[(row, col)] = amp;
    }
    m
}

pub fn dense_observable(obs: &Observable, qubits: usize) -> CMat {
    let d = 1usize << qubits;
    obs.terms()
        .iter()
        .fold(CMat::zeros(d, d), |acc, t| acc + dense_pauli(&t.paulis) * Complex64::new(t.coeff, 0.0))
}

pub fn expm_i(h: &CMat, t: f64) -> CMat {
    (h * Complex64::new(0.0, t)).exp()
}

pub fn hadamard_layer(qubits: usize) -> CMat {
    let d = 1usize << qubits;
    let s = (d as f64).sqrt().recip();
    CMat::from_fn(d, d, |r, c| {
        let sign = if (r & c).count_ones() % 2 == 0 { 1.0 } else { -1.0 };
        Complex64::new(sign * s, 0.0)
    })
}

pub fn circuit_unitary(c: &Circuit) -> CMat {
    let q = c.num_qubits();
    let d = 1usize << q;
    let mut u = CMat::zeros(d, d);
    for col in 0..d {
        let mut sv = StateVector::new(q, &StateSpec::AllZero, &SimLimits::default()).unwrap();
        let amps = sv.amplitudes_mut();
        amps[0] = Complex64::new(0.0, 0.0);
        amps[col] = Complex64::new(1.0, 0.0);
        sv.apply_circuit(c);
        for (row, a) in sv.amplitudes().iter().enumerate() {
            u[(row, col)] = *a;
        }
    }
    u
}

pub fn ising_parts(spec: &IsingSpec) -> (CMat, CMat) {
    let q = spec.qubits;
    let d = 1usize << q;
    let mut h1 = CMat::zeros(d, d);
    let mut h2 = CMat::zeros(d, d);
    for t in ising_observable(spec).terms() {
        let m = dense_pauli(&t.paulis) * Complex64::new(t.coeff, 0.0);
        if t.paulis.x != 0 {
            h2 += m;
        } else {
            h1 += m;
        }
    }
    (h1, h2)
}

/// `Π_{j=p..1} e^{iβ_j H₂} e^{iγ_j H₁}` applied after the Hadamard layer.
pub fn qaoa_oracle(spec: &IsingSpec, params: &QaoaParams) -> CMat {
    let (h1, h2) = ising_parts(spec);
    let mut u = hadamard_layer(spec.qubits);
    for (b, g) in params.betas.iter().zip(&params.gammas) {
        u = expm_i(&h1, *g) * u;
        u = expm_i(&h2, *b) * u;
    }
    u
}

