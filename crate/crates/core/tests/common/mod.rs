#![allow(dead_code)]

pub mod dense;

use cdrkit::circuit::{Circuit, Gate, Observable, Pauli, PauliString, PauliTerm};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Random circuit with exactly `rotations` non-Clifford rotations among `len` gates.
pub fn random_circuit(rng: &mut ChaCha8Rng, qubits: usize, len: usize, rotations: usize) -> Circuit {
    let mut slots: Vec<bool> = (0..len).map(|i| i < rotations).collect();
    for i in (1..slots.len()).rev() {
        let j = rng.random_range(0..=i);
        slots.swap(i, j);
    }
    let mut c = Circuit::new(qubits).unwrap();
    for rotation in slots {
        let q = rng.random_range(0..qubits);
        let g = if rotation {
            let a = loop {
                let a: f64 = rng.random_range(0.0..std::f64::consts::TAU);
                if !cdrkit::Angle::new(a).is_clifford() {
                    break a;
                }
            };
            if rng.random_bool(0.5) {
                Gate::rz(q, a)
            } else {
                Gate::rx(q, a)
            }
        } else {
            match rng.random_range(0..9) {
                0 => Gate::H(q),
                1 => Gate::X(q),
                2 => Gate::Y(q),
                3 => Gate::Z(q),
                4 => Gate::S(q),
                5 => Gate::Sdag(q),
                6 => Gate::P(q),
                7 => Gate::rz(q, f64::from(rng.random_range(0..4u8)) * std::f64::consts::FRAC_PI_2),
                _ if qubits > 1 => Gate::cnot(q, (q + rng.random_range(1..qubits)) % qubits),
                _ => Gate::H(q),
            }
        };
        c.push(g).unwrap();
    }
    c
}

pub fn random_string(rng: &mut ChaCha8Rng, qubits: usize) -> PauliString {
    let mut p = PauliString::identity(qubits);
    for q in 0..qubits {
        p.set(q, [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][rng.random_range(0..4)]);
    }
    p
}

pub fn random_observable(rng: &mut ChaCha8Rng, qubits: usize, terms: usize) -> Observable {
    Observable::new((0..terms).map(|_| PauliTerm {
        coeff: rng.random_range(-1.0..1.0),
        paulis: random_string(rng, qubits),
    }))
    .unwrap()
}
