//! Clifford action on Pauli strings.

use serde::{Deserialize, Serialize};

use crate::circuit::{Angle, Gate, Pauli, PauliString};

/// Heisenberg update `U† P U` for a Clifford gate `U`, on the packed string
/// `(x, z)`. Returns the new string and whether the sign flips; `None` when
/// the gate is a non-Clifford rotation.
pub(crate) fn heisenberg_clifford(gate: &Gate, x: u64, z: u64) -> Option<(u64, u64, bool)> {
    let bit = |q: usize| 1u64 << q;
    match *gate {
        Gate::H(q) => {
            let b = bit(q);
            let (xb, zb) = (x & b != 0, z & b != 0);
            let mut x2 = x & !b;
            let mut z2 = z & !b;
            if zb {
                x2 |= b;
            }
            if xb {
                z2 |= b;
            }
            Some((x2, z2, xb && zb))
        }
        Gate::X(q) => Some((x, z, z & bit(q) != 0)),
        Gate::Y(q) => Some((x, z, (x ^ z) & bit(q) != 0)),
        Gate::Z(q) => Some((x, z, x & bit(q) != 0)),
        Gate::S(q) => Some(rotate_z(q, 1, x, z)),
        Gate::Sdag(q) => Some(rotate_z(q, 3, x, z)),
        Gate::P(q) => Some(rotate_x(q, 1, x, z)),
        Gate::Rz { qubit, angle } => angle.clifford_power().map(|k| rotate_z(qubit, k, x, z)),
        Gate::Rx { qubit, angle } => angle.clifford_power().map(|k| rotate_x(qubit, k, x, z)),
        Gate::Cnot { control, target } => {
            let xc = (x >> control) & 1;
            let zc = (z >> control) & 1;
            let xt = (x >> target) & 1;
            let zt = (z >> target) & 1;
            let negate = xc & zt & (xt ^ zc ^ 1) == 1;
            Some((x ^ (xc << target), z ^ (zt << control), negate))
        }
    }
}

// RZ(kπ/2): X → cX − sY, Y → cY + sX.
fn rotate_z(q: usize, k: u8, x: u64, z: u64) -> (u64, u64, bool) {
    let b = 1u64 << q;
    if x & b == 0 {
        return (x, z, false);
    }
    match k % 4 {
        0 => (x, z, false),
        2 => (x, z, true),
        k => {
            let s_positive = k == 1;
            let from_x = z & b == 0;
            (x, z ^ b, from_x == s_positive)
        }
    }
}

// RX(kπ/2): Z → cZ + sY, Y → cY − sZ.
fn rotate_x(q: usize, k: u8, x: u64, z: u64) -> (u64, u64, bool) {
    let b = 1u64 << q;
    if z & b == 0 {
        return (x, z, false);
    }
    match k % 4 {
        0 => (x, z, false),
        2 => (x, z, true),
        k => {
            let s_positive = k == 1;
            let from_z = x & b == 0;
            (x ^ b, z, from_z != s_positive)
        }
    }
}

fn inverse(gate: &Gate) -> Gate {
    match *gate {
        Gate::S(q) => Gate::Sdag(q),
        Gate::Sdag(q) => Gate::S(q),
        Gate::P(q) => Gate::Rx {
            qubit: q,
            angle: Angle::quarter_turns(3),
        },
        Gate::Rz { qubit, angle } => Gate::rz(qubit, -angle.radians()),
        Gate::Rx { qubit, angle } => Gate::rx(qubit, -angle.radians()),
        g => g,
    }
}

/// Forward conjugation `G P G†` of a Clifford gate; `None` for non-Clifford rotations.
pub fn conjugate_forward(gate: &Gate, p: &PauliString) -> Option<(PauliString, bool)> {
    let (x, z, negate) = heisenberg_clifford(&inverse(gate), p.x, p.z)?;
    Some((PauliString { x, z, len: p.len }, negate))
}

/// One row of the conjugation table: `gate · input · gate† = sign · output`.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ConjugationRule {
    pub gate: String,
    pub input: String,
    pub output: String,
    pub sign: i8,
}

/// Images of every non-identity Pauli under each fixed Clifford gate.
/// Single-qubit gates act on qubit 0; CNOT has control 0 and target 1.
/// Strings are written qubit 0 first.
pub fn clifford_conjugation_table() -> Vec<ConjugationRule> {
    let single = [Gate::H(0), Gate::X(0), Gate::Y(0), Gate::Z(0), Gate::S(0), Gate::Sdag(0), Gate::P(0)];
    let mut rows = Vec::new();
    for g in single {
        for p in [Pauli::X, Pauli::Y, Pauli::Z] {
            rows.push(rule(&g, PauliString::single(1, 0, p)));
        }
    }
    let cnot = Gate::cnot(0, 1);
    for code in 1..16u8 {
        let mut p = PauliString::identity(2);
        p.set(0, letter(code & 3));
        p.set(1, letter(code >> 2));
        rows.push(rule(&cnot, p));
    }
    rows
}

fn letter(code: u8) -> Pauli {
    [Pauli::I, Pauli::X, Pauli::Y, Pauli::Z][code as usize]
}

fn rule(g: &Gate, p: PauliString) -> ConjugationRule {
    let (out, negate) = conjugate_forward(g, &p).expect("fixed gates are Clifford");
    ConjugationRule {
        gate: g.kind().name().to_string(),
        input: p.to_string(),
        output: out.to_string(),
        sign: if negate { -1 } else { 1 },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use nalgebra::DMatrix;
    use num_complex::Complex64;

    type M = DMatrix<Complex64>;

    fn c(re: f64, im: f64) -> Complex64 {
        Complex64::new(re, im)
    }

    fn pauli_matrix(p: Pauli) -> M {
        let (o, l, i) = (c(0., 0.), c(1., 0.), c(0., 1.));
        match p {
            Pauli::I => M::from_row_slice(2, 2, &[l, o, o, l]),
            Pauli::X => M::from_row_slice(2, 2, &[o, l, l, o]),
            Pauli::Y => M::from_row_slice(2, 2, &[o, -i, i, o]),
            Pauli::Z => M::from_row_slice(2, 2, &[l, o, o, -l]),
        }
    }

    // Qubit 0 is the least significant bit, so it is the right Kronecker factor.
    fn string_matrix(p: &PauliString) -> M {
        let mut m = M::from_element(1, 1, c(1., 0.));
        for q in 0..p.len {
            m = pauli_matrix(p.get(q)).kronecker(&m);
        }
        m
    }

    fn gate_matrix(g: &Gate) -> M {
        let r = std::f64::consts::FRAC_1_SQRT_2;
        let (o, l, i) = (c(0., 0.), c(1., 0.), c(0., 1.));
        match g {
            Gate::H(_) => M::from_row_slice(2, 2, &[c(r, 0.), c(r, 0.), c(r, 0.), c(-r, 0.)]),
            Gate::X(_) => pauli_matrix(Pauli::X),
            Gate::Y(_) => pauli_matrix(Pauli::Y),
            Gate::Z(_) => pauli_matrix(Pauli::Z),
            Gate::S(_) => M::from_row_slice(2, 2, &[l, o, o, i]),
            Gate::Sdag(_) => M::from_row_slice(2, 2, &[l, o, o, -i]),
            Gate::P(_) => M::from_row_slice(2, 2, &[c(r, 0.), c(0., -r), c(0., -r), c(r, 0.)]),
            Gate::Rz { angle, .. } => {
                let t = angle.radians() / 2.0;
                M::from_row_slice(2, 2, &[Complex64::cis(-t), o, o, Complex64::cis(t)])
            }
            Gate::Rx { angle, .. } => {
                let t = angle.radians() / 2.0;
                let (co, si) = (c(t.cos(), 0.), c(0., -t.sin()));
                M::from_row_slice(2, 2, &[co, si, si, co])
            }
            // basis index = q0 + 2 q1, control 0, target 1
            Gate::Cnot { .. } => {
                let mut m = M::zeros(4, 4);
                for (col, row) in [(0, 0), (1, 3), (2, 2), (3, 1)] {
                    m[(row, col)] = l;
                }
                m
            }
        }
    }

    fn all_strings(n: usize) -> Vec<PauliString> {
        (0..4usize.pow(n as u32))
            .map(|code| {
                let mut p = PauliString::identity(n);
                for q in 0..n {
                    p.set(q, letter(((code >> (2 * q)) & 3) as u8));
                }
                p
            })
            .collect()
    }

    fn close(a: &M, b: &M) -> bool {
        (a - b).iter().all(|z| z.norm() < 1e-12)
    }

    #[test]
    fn heisenberg_matches_matrices() {
        let mut gates = vec![Gate::H(0), Gate::X(0), Gate::Y(0), Gate::Z(0), Gate::S(0), Gate::Sdag(0), Gate::P(0)];
        for k in 0..4 {
            gates.push(Gate::Rz { qubit: 0, angle: Angle::quarter_turns(k) });
            gates.push(Gate::Rx { qubit: 0, angle: Angle::quarter_turns(k) });
        }
        for g in &gates {
            let u = gate_matrix(g);
            for p in all_strings(1) {
                let (x, z, neg) = heisenberg_clifford(g, p.x, p.z).unwrap();
                let expect = u.adjoint() * string_matrix(&p) * &u;
                let sign = if neg { -1.0 } else { 1.0 };
                let got = string_matrix(&PauliString { x, z, len: 1 }) * c(sign, 0.);
                assert!(close(&expect, &got), "{g} on {p}");
            }
        }
        let u = gate_matrix(&Gate::cnot(0, 1));
        for p in all_strings(2) {
            let (x, z, neg) = heisenberg_clifford(&Gate::cnot(0, 1), p.x, p.z).unwrap();
            let expect = u.adjoint() * string_matrix(&p) * &u;
            let got = string_matrix(&PauliString { x, z, len: 2 }) * c(if neg { -1.0 } else { 1.0 }, 0.);
            assert!(close(&expect, &got), "CNOT on {p}");
        }
    }

    #[test]
    fn reversed_cnot_matches_matrix() {
        let g = Gate::cnot(1, 0);
        let swap = gate_matrix(&Gate::cnot(0, 1));
        // CNOT(1,0) in the same basis: |q0 q1⟩ → |q0⊕q1, q1⟩
        let mut u = M::zeros(4, 4);
        for col in 0..4usize {
            let (q0, q1) = (col & 1, col >> 1);
            u[((q0 ^ q1) | (q1 << 1), col)] = c(1., 0.);
        }
        assert!(!close(&u, &swap));
        for p in all_strings(2) {
            let (x, z, neg) = heisenberg_clifford(&g, p.x, p.z).unwrap();
            let expect = u.adjoint() * string_matrix(&p) * &u;
            let got = string_matrix(&PauliString { x, z, len: 2 }) * c(if neg { -1.0 } else { 1.0 }, 0.);
            assert!(close(&expect, &got), "CNOT(1,0) on {p}");
        }
    }

    #[test]
    fn table_is_forward_conjugation() {
        let table = clifford_conjugation_table();
        assert_eq!(table.len(), 7 * 3 + 15);
        for row in &table {
            let g = match row.gate.as_str() {
                "H" => Gate::H(0),
                "X" => Gate::X(0),
                "Y" => Gate::Y(0),
                "Z" => Gate::Z(0),
                "S" => Gate::S(0),
                "P" => Gate::P(0),
                "CNOT" => Gate::cnot(0, 1),
                _ => Gate::Sdag(0),
            };
            assert_eq!(g.kind().name(), row.gate);
            let u = gate_matrix(&g);
            let p = PauliString::parse(&row.input).unwrap();
            let out = PauliString::parse(&row.output).unwrap();
            let expect = &u * string_matrix(&p) * u.adjoint();
            let got = string_matrix(&out) * c(f64::from(row.sign), 0.);
            assert!(close(&expect, &got), "{row:?}");
        }
    }

    #[test]
    fn known_images() {
        let find = |g: &str, i: &str| {
            clifford_conjugation_table()
                .into_iter()
                .find(|r| r.gate == g && r.input == i)
                .unwrap()
        };
        let r = find("H", "X");
        assert_eq!((r.output.as_str(), r.sign), ("Z", 1));
        let r = find("S", "X");
        assert_eq!((r.output.as_str(), r.sign), ("Y", 1));
        let r = find("CNOT", "XI");
        assert_eq!((r.output.as_str(), r.sign), ("XX", 1));
        let r = find("CNOT", "IZ");
        assert_eq!((r.output.as_str(), r.sign), ("ZZ", 1));
    }
}
