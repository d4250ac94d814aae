//! Circuits, Pauli observables and Clifford classification.
//!
//! Rotation angles are canonicalized to `[0, 2π)` on construction. Qubit `q`
//! of a circuit corresponds to letter `q` of a Pauli string and to bit `q` of a
//! computational-basis index.

use std::f64::consts::{FRAC_PI_2, PI, TAU};
use std::fmt;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use crate::error::{CdrError, Result};

/// Maximum register width. Pauli strings are packed into a pair of `u64` masks.
pub const MAX_QUBITS: usize = 64;

/// Angular tolerance for classifying a rotation as Clifford.
pub const CLIFFORD_TOLERANCE: f64 = 1e-9;

/// A rotation angle in radians, canonicalized to `[0, 2π)`.
#[derive(Debug, Clone, Copy, PartialEq, PartialOrd)]
pub struct Angle(f64);

impl Angle {
    pub fn new(radians: f64) -> Self {
        let mut r = radians.rem_euclid(TAU);
        if r >= TAU {
            r = 0.0;
        }
        Angle(r)
    }

    /// `k·π/2` for `k ∈ {0,1,2,3}`.
    pub fn quarter_turns(k: u8) -> Self {
        Angle(f64::from(k % 4) * FRAC_PI_2)
    }

    pub fn radians(self) -> f64 {
        self.0
    }

    /// Power `k` such that the angle equals `k·π/2` within [`CLIFFORD_TOLERANCE`].
    pub fn clifford_power(self) -> Option<u8> {
        let k = (self.0 / FRAC_PI_2).round();
        if (self.0 - k * FRAC_PI_2).abs() <= CLIFFORD_TOLERANCE {
            Some((k as i64).rem_euclid(4) as u8)
        } else {
            None
        }
    }

    pub fn is_clifford(self) -> bool {
        self.clifford_power().is_some()
    }

    /// `(cos θ, sin θ)`, exact for Clifford angles.
    pub fn cos_sin(self) -> (f64, f64) {
        match self.clifford_power() {
            Some(0) => (1.0, 0.0),
            Some(1) => (0.0, 1.0),
            Some(2) => (-1.0, 0.0),
            Some(3) => (0.0, -1.0),
            _ => (self.0.cos(), self.0.sin()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum GateKind {
    H,
    X,
    Y,
    Z,
    S,
    Sdag,
    #[serde(rename = "CNOT")]
    Cnot,
    P,
    #[serde(rename = "RZ")]
    Rz,
    #[serde(rename = "RX")]
    Rx,
}

impl GateKind {
    pub fn name(self) -> &'static str {
        match self {
            GateKind::H => "H",
            GateKind::X => "X",
            GateKind::Y => "Y",
            GateKind::Z => "Z",
            GateKind::S => "S",
            GateKind::Sdag => "Sdag",
            GateKind::Cnot => "CNOT",
            GateKind::P => "P",
            GateKind::Rz => "RZ",
            GateKind::Rx => "RX",
        }
    }

    pub fn from_name(name: &str) -> Option<Self> {
        Some(match name {
            "H" => GateKind::H,
            "X" => GateKind::X,
            "Y" => GateKind::Y,
            "Z" => GateKind::Z,
            "S" => GateKind::S,
            "Sdag" => GateKind::Sdag,
            "CNOT" => GateKind::Cnot,
            "P" => GateKind::P,
            "RZ" => GateKind::Rz,
            "RX" => GateKind::Rx,
            _ => return None,
        })
    }

    pub fn arity(self) -> usize {
        if self == GateKind::Cnot {
            2
        } else {
            1
        }
    }

    pub fn is_rotation(self) -> bool {
        matches!(self, GateKind::Rz | GateKind::Rx)
    }
}

/// A gate of the supported set.
///
/// `P` is the fixed Clifford rotation `RX(π/2) = exp(-iσ_X π/4)`;
/// `RZ(α) = exp(-iσ_Z α/2)` and `RX(α) = exp(-iσ_X α/2)`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Gate {
    H(usize),
    X(usize),
    Y(usize),
    Z(usize),
    S(usize),
    Sdag(usize),
    P(usize),
    Cnot { control: usize, target: usize },
    Rz { qubit: usize, angle: Angle },
    Rx { qubit: usize, angle: Angle },
}

impl Gate {
    pub fn rz(qubit: usize, radians: f64) -> Self {
        Gate::Rz {
            qubit,
            angle: Angle::new(radians),
        }
    }

    pub fn rx(qubit: usize, radians: f64) -> Self {
        Gate::Rx {
            qubit,
            angle: Angle::new(radians),
        }
    }

    pub fn cnot(control: usize, target: usize) -> Self {
        Gate::Cnot { control, target }
    }

    pub fn kind(&self) -> GateKind {
        match self {
            Gate::H(_) => GateKind::H,
            Gate::X(_) => GateKind::X,
            Gate::Y(_) => GateKind::Y,
            Gate::Z(_) => GateKind::Z,
            Gate::S(_) => GateKind::S,
            Gate::Sdag(_) => GateKind::Sdag,
            Gate::P(_) => GateKind::P,
            Gate::Cnot { .. } => GateKind::Cnot,
            Gate::Rz { .. } => GateKind::Rz,
            Gate::Rx { .. } => GateKind::Rx,
        }
    }

    /// Qubits the gate acts on; `(control, target)` for CNOT.
    pub fn qubits(&self) -> Vec<usize> {
        match *self {
            Gate::Cnot { control, target } => vec![control, target],
            Gate::H(q)
            | Gate::X(q)
            | Gate::Y(q)
            | Gate::Z(q)
            | Gate::S(q)
            | Gate::Sdag(q)
            | Gate::P(q)
            | Gate::Rz { qubit: q, .. }
            | Gate::Rx { qubit: q, .. } => vec![q],
        }
    }

    pub fn angle(&self) -> Option<Angle> {
        match *self {
            Gate::Rz { angle, .. } | Gate::Rx { angle, .. } => Some(angle),
            _ => None,
        }
    }

    /// Same gate with the rotation angle replaced. Non-rotations are returned unchanged.
    pub fn with_angle(&self, angle: Angle) -> Gate {
        match *self {
            Gate::Rz { qubit, .. } => Gate::Rz { qubit, angle },
            Gate::Rx { qubit, .. } => Gate::Rx { qubit, angle },
            g => g,
        }
    }

    pub fn is_clifford(&self) -> bool {
        self.angle().is_none_or(|a| a.is_clifford())
    }

    pub fn max_qubit(&self) -> usize {
        self.qubits().into_iter().max().unwrap_or(0)
    }

    fn build(kind: GateKind, qubits: &[usize], angle: Option<f64>) -> std::result::Result<Gate, String> {
        if qubits.len() != kind.arity() {
            return Err(format!(
                "{} expects {} qubit index(es), got {}",
                kind.name(),
                kind.arity(),
                qubits.len()
            ));
        }
        match (kind.is_rotation(), angle) {
            (true, None) => return Err(format!("{} requires an angle", kind.name())),
            (false, Some(_)) => return Err(format!("{} takes no angle", kind.name())),
            (true, Some(a)) if !a.is_finite() => return Err("angle must be finite".into()),
            _ => {}
        }
        let q = qubits[0];
        Ok(match kind {
            GateKind::H => Gate::H(q),
            GateKind::X => Gate::X(q),
            GateKind::Y => Gate::Y(q),
            GateKind::Z => Gate::Z(q),
            GateKind::S => Gate::S(q),
            GateKind::Sdag => Gate::Sdag(q),
            GateKind::P => Gate::P(q),
            GateKind::Cnot => {
                if qubits[0] == qubits[1] {
                    return Err("CNOT control and target must differ".into());
                }
                Gate::cnot(qubits[0], qubits[1])
            }
            GateKind::Rz => Gate::rz(q, angle.unwrap_or_default()),
            GateKind::Rx => Gate::rx(q, angle.unwrap_or_default()),
        })
    }
}

impl fmt::Display for Gate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let qs = self
            .qubits()
            .iter()
            .map(|q| q.to_string())
            .collect::<Vec<_>>()
            .join(",");
        match self.angle() {
            Some(a) => write!(f, "{}({:.6})[{}]", self.kind().name(), a.radians(), qs),
            None => write!(f, "{}[{}]", self.kind().name(), qs),
        }
    }
}

/// An ordered gate list over a fixed register.
#[derive(Debug, Clone, PartialEq)]
pub struct Circuit {
    qubits: usize,
    gates: Vec<Gate>,
}

impl Circuit {
    pub fn new(qubits: usize) -> Result<Self> {
        if qubits == 0 || qubits > MAX_QUBITS {
            return Err(CdrError::Invalid(format!(
                "qubit count must be in 1..={MAX_QUBITS}, got {qubits}"
            )));
        }
        Ok(Circuit {
            qubits,
            gates: Vec::new(),
        })
    }

    pub fn from_gates(qubits: usize, gates: impl IntoIterator<Item = Gate>) -> Result<Self> {
        let mut c = Circuit::new(qubits)?;
        for g in gates {
            c.push(g)?;
        }
        Ok(c)
    }

    pub fn push(&mut self, gate: Gate) -> Result<()> {
        if let Some(q) = gate.qubits().into_iter().find(|&q| q >= self.qubits) {
            return Err(CdrError::Invalid(format!(
                "gate {gate} uses qubit {q} but the circuit has {} qubits",
                self.qubits
            )));
        }
        if let Gate::Cnot { control, target } = gate {
            if control == target {
                return Err(CdrError::Invalid("CNOT control and target must differ".into()));
            }
        }
        self.gates.push(gate);
        Ok(())
    }

    pub fn num_qubits(&self) -> usize {
        self.qubits
    }

    pub fn gates(&self) -> &[Gate] {
        &self.gates
    }

    pub fn len(&self) -> usize {
        self.gates.len()
    }

    pub fn is_empty(&self) -> bool {
        self.gates.is_empty()
    }

    pub fn count(&self, kind: GateKind) -> usize {
        self.gates.iter().filter(|g| g.kind() == kind).count()
    }

    pub fn non_clifford_count(&self) -> usize {
        self.gates.iter().filter(|g| !g.is_clifford()).count()
    }

    /// Gate indices of rotations that are not Clifford.
    pub fn non_clifford_sites(&self) -> Vec<usize> {
        self.gates
            .iter()
            .enumerate()
            .filter(|(_, g)| !g.is_clifford())
            .map(|(i, _)| i)
            .collect()
    }

    /// Angles of every rotation gate, in circuit order.
    pub fn rotation_angles(&self) -> Vec<f64> {
        self.gates
            .iter()
            .filter_map(|g| g.angle().map(Angle::radians))
            .collect()
    }

    pub(crate) fn set_angle(&mut self, index: usize, angle: Angle) {
        self.gates[index] = self.gates[index].with_angle(angle);
    }

    pub fn append(&mut self, other: &Circuit) -> Result<()> {
        for g in other.gates() {
            self.push(*g)?;
        }
        Ok(())
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(&RawCircuit::from(self)).expect("circuit serializes")
    }

    /// Parse the JSON circuit format, reporting the offending line or field.
    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawCircuit = parse_json(text)?;
        Circuit::try_from_raw(&raw)
    }

    fn try_from_raw(raw: &RawCircuit) -> Result<Self> {
        if raw.qubits == 0 || raw.qubits > MAX_QUBITS {
            return Err(CdrError::parse(
                "qubits",
                format!("qubit count must be in 1..={MAX_QUBITS}, got {}", raw.qubits),
            ));
        }
        let mut c = Circuit::new(raw.qubits)?;
        for (i, g) in raw.gates.iter().enumerate() {
            let kind = GateKind::from_name(&g.kind).ok_or_else(|| {
                CdrError::parse(format!("gates[{i}].kind"), format!("unknown gate kind {:?}", g.kind))
            })?;
            if let Some(j) = g.qubits.iter().position(|&q| q >= raw.qubits) {
                return Err(CdrError::parse(
                    format!("gates[{i}].qubits[{j}]"),
                    format!("qubit index {} out of range for {} qubits", g.qubits[j], raw.qubits),
                ));
            }
            let gate = Gate::build(kind, &g.qubits, g.angle)
                .map_err(|m| CdrError::parse(format!("gates[{i}]"), m))?;
            c.gates.push(gate);
        }
        Ok(c)
    }
}

impl fmt::Display for Circuit {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "circuit on {} qubits:", self.qubits)?;
        for g in &self.gates {
            write!(f, " {g}")?;
        }
        Ok(())
    }
}

fn parse_json<T: serde::de::DeserializeOwned>(text: &str) -> Result<T> {
    let de = &mut serde_json::Deserializer::from_str(text);
    serde_path_to_error::deserialize(de).map_err(|e| {
        let path = e.path().to_string();
        let inner = e.into_inner();
        CdrError::parse(
            format!("line {} column {} ({path})", inner.line(), inner.column()),
            inner.to_string(),
        )
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawGate {
    kind: String,
    qubits: Vec<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    angle: Option<f64>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawCircuit {
    qubits: usize,
    gates: Vec<RawGate>,
}

impl From<&Circuit> for RawCircuit {
    fn from(c: &Circuit) -> Self {
        RawCircuit {
            qubits: c.qubits,
            gates: c
                .gates
                .iter()
                .map(|g| RawGate {
                    kind: g.kind().name().to_string(),
                    qubits: g.qubits(),
                    angle: g.angle().map(Angle::radians),
                })
                .collect(),
        }
    }
}

impl Serialize for Circuit {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawCircuit::from(self).serialize(s)
    }
}

impl<'de> Deserialize<'de> for Circuit {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawCircuit::deserialize(d)?;
        Circuit::try_from_raw(&raw).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Pauli strings and observables
// ---------------------------------------------------------------------------

/// Single-qubit Pauli letter.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Pauli {
    I,
    X,
    Y,
    Z,
}

impl Pauli {
    pub fn from_bits(x: bool, z: bool) -> Self {
        match (x, z) {
            (false, false) => Pauli::I,
            (true, false) => Pauli::X,
            (true, true) => Pauli::Y,
            (false, true) => Pauli::Z,
        }
    }

    pub fn bits(self) -> (bool, bool) {
        match self {
            Pauli::I => (false, false),
            Pauli::X => (true, false),
            Pauli::Y => (true, true),
            Pauli::Z => (false, true),
        }
    }

    pub fn letter(self) -> char {
        match self {
            Pauli::I => 'I',
            Pauli::X => 'X',
            Pauli::Y => 'Y',
            Pauli::Z => 'Z',
        }
    }
}

/// A Hermitian Pauli string `⊗_q σ_q`, packed as X and Z bit masks
/// (letter Y sets both bits).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct PauliString {
    pub x: u64,
    pub z: u64,
    pub len: usize,
}

impl PauliString {
    pub fn identity(len: usize) -> Self {
        PauliString { x: 0, z: 0, len }
    }

    pub fn single(len: usize, qubit: usize, p: Pauli) -> Self {
        let mut s = PauliString::identity(len);
        s.set(qubit, p);
        s
    }

    pub fn get(&self, qubit: usize) -> Pauli {
        Pauli::from_bits(self.x >> qubit & 1 == 1, self.z >> qubit & 1 == 1)
    }

    pub fn set(&mut self, qubit: usize, p: Pauli) {
        let (x, z) = p.bits();
        let m = 1u64 << qubit;
        self.x = (self.x & !m) | if x { m } else { 0 };
        self.z = (self.z & !m) | if z { m } else { 0 };
    }

    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn parse(text: &str) -> Result<Self> {
        if text.is_empty() || text.len() > MAX_QUBITS {
            return Err(CdrError::parse(
                "paulis",
                format!("Pauli string length must be in 1..={MAX_QUBITS}"),
            ));
        }
        let mut s = PauliString::identity(text.len());
        for (q, ch) in text.chars().enumerate() {
            let p = match ch {
                'I' => Pauli::I,
                'X' => Pauli::X,
                'Y' => Pauli::Y,
                'Z' => Pauli::Z,
                other => {
                    return Err(CdrError::parse(
                        format!("paulis[{q}]"),
                        format!("invalid Pauli letter {other:?}"),
                    ))
                }
            };
            s.set(q, p);
        }
        Ok(s)
    }
}

impl fmt::Display for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.len {
            write!(f, "{}", self.get(q).letter())?;
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PauliTerm {
    pub coeff: f64,
    pub paulis: PauliString,
}

/// A real linear combination of Pauli strings. Terms with identical strings
/// are merged and zero-coefficient terms dropped; term order is preserved.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct Observable {
    terms: Vec<PauliTerm>,
}

impl Observable {
    pub fn new(terms: impl IntoIterator<Item = PauliTerm>) -> Result<Self> {
        let mut merged: Vec<PauliTerm> = Vec::new();
        let mut width = None;
        for t in terms {
            if !t.coeff.is_finite() {
                return Err(CdrError::Invalid("observable coefficient must be finite".into()));
            }
            match width {
                None => width = Some(t.paulis.len),
                Some(w) if w != t.paulis.len => {
                    return Err(CdrError::Invalid(format!(
                        "Pauli strings of mixed length ({w} and {})",
                        t.paulis.len
                    )))
                }
                _ => {}
            }
            match merged.iter_mut().find(|m| m.paulis == t.paulis) {
                Some(m) => m.coeff += t.coeff,
                None => merged.push(t),
            }
        }
        merged.retain(|t| t.coeff != 0.0);
        Ok(Observable { terms: merged })
    }

    pub fn single(coeff: f64, paulis: PauliString) -> Self {
        Observable {
            terms: vec![PauliTerm { coeff, paulis }],
        }
    }

    pub fn terms(&self) -> &[PauliTerm] {
        &self.terms
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn width(&self) -> Option<usize> {
        self.terms.first().map(|t| t.paulis.len)
    }

    /// `Tr(X)/d`: the coefficient of the identity string.
    pub fn normalized_trace(&self) -> f64 {
        self.terms
            .iter()
            .filter(|t| t.paulis.is_identity())
            .map(|t| t.coeff)
            .sum()
    }

    /// Recombine per-term expectation values into `⟨X⟩`.
    pub fn combine(&self, term_values: &[f64]) -> f64 {
        self.terms
            .iter()
            .zip(term_values)
            .map(|(t, v)| t.coeff * v)
            .sum()
    }

    pub fn check_width(&self, qubits: usize) -> Result<()> {
        match self.width() {
            Some(w) if w != qubits => Err(CdrError::Invalid(format!(
                "observable acts on {w} qubits but the circuit has {qubits}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("observable serializes")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let raw: RawObservable = parse_json(text)?;
        Observable::try_from_raw(raw)
    }

    fn try_from_raw(raw: RawObservable) -> Result<Self> {
        let mut terms = Vec::with_capacity(raw.terms.len());
        for (i, t) in raw.terms.iter().enumerate() {
            let paulis = PauliString::parse(&t.paulis).map_err(|e| match e {
                CdrError::Parse { location, message } => {
                    CdrError::parse(format!("terms[{i}].{location}"), message)
                }
                other => other,
            })?;
            terms.push(PauliTerm {
                coeff: t.coeff,
                paulis,
            });
        }
        Observable::new(terms)
    }
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawTerm {
    coeff: f64,
    paulis: String,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
struct RawObservable {
    terms: Vec<RawTerm>,
}

impl Serialize for Observable {
    fn serialize<S: serde::Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        RawObservable {
            terms: self
                .terms
                .iter()
                .map(|t| RawTerm {
                    coeff: t.coeff,
                    paulis: t.paulis.to_string(),
                })
                .collect(),
        }
        .serialize(s)
    }
}

impl<'de> Deserialize<'de> for Observable {
    fn deserialize<D: serde::Deserializer<'de>>(d: D) -> std::result::Result<Self, D::Error> {
        let raw = RawObservable::deserialize(d)?;
        Observable::try_from_raw(raw).map_err(serde::de::Error::custom)
    }
}

// ---------------------------------------------------------------------------
// Nearest-Clifford substitution weights
// ---------------------------------------------------------------------------

/// Matrix distance used when weighting the Clifford replacements of a rotation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DistanceNorm {
    /// Frobenius norm of `R(α) − R(nπ/2)` minimized over a global phase.
    #[default]
    FrobeniusModPhase,
    /// Frobenius norm of `R(α) − R(nπ/2)` with both matrices taken literally
    /// at the canonical angle.
    Frobenius,
    /// Spectral norm of `R(α) − R(nπ/2)`.
    Operator,
}

/// Weights `w(n) = exp(−d²/σ²)` for replacing a rotation by its `n`-th
/// quarter-turn, `n ∈ {0,1,2,3}`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct SubstitutionWeights {
    pub distances: [f64; 4],
    pub weights: [f64; 4],
    pub probabilities: [f64; 4],
}

impl SubstitutionWeights {
    pub fn argmax(&self) -> u8 {
        let mut best = 0;
        for n in 1..4 {
            if self.weights[n] > self.weights[best] {
                best = n;
            }
        }
        best as u8
    }
}

fn rz_diag(theta: f64) -> [Complex64; 2] {
    [
        Complex64::from_polar(1.0, -theta / 2.0),
        Complex64::from_polar(1.0, theta / 2.0),
    ]
}

/// Distance between `RZ(angle)` and `S^n = RZ(nπ/2)`.
///
/// `RX` rotations are unitarily equivalent (conjugation by H), so the same
/// distances apply to them.
pub fn rotation_distance(angle: Angle, n: u8, norm: DistanceNorm) -> f64 {
    let u = rz_diag(angle.radians());
    let v = rz_diag(f64::from(n) * FRAC_PI_2);
    match norm {
        DistanceNorm::Frobenius => ((u[0] - v[0]).norm_sqr() + (u[1] - v[1]).norm_sqr()).sqrt(),
        DistanceNorm::FrobeniusModPhase => {
            // min_φ ‖U − e^{iφ}V‖²_F = ‖U‖² + ‖V‖² − 2|Tr(U†V)|
            let overlap = (u[0].conj() * v[0] + u[1].conj() * v[1]).norm();
            (4.0 - 2.0 * overlap).max(0.0).sqrt()
        }
        DistanceNorm::Operator => (u[0] - v[0]).norm().max((u[1] - v[1]).norm()),
    }
}

pub fn clifford_substitution_weights(angle: Angle, sigma: f64, norm: DistanceNorm) -> Result<SubstitutionWeights> {
    if !(sigma > 0.0 && sigma.is_finite()) {
        return Err(CdrError::Domain(format!("sigma must be positive, got {sigma}")));
    }
    let mut distances = [0.0; 4];
    let mut weights = [0.0; 4];
    for n in 0..4u8 {
        let d = rotation_distance(angle, n, norm);
        distances[n as usize] = d;
        weights[n as usize] = (-d * d / (sigma * sigma)).exp();
    }
    // Weights may underflow for tiny sigma; fall back to the nearest power.
    let total: f64 = weights.iter().sum();
    let probabilities = if total > 0.0 && total.is_finite() {
        weights.map(|w| w / total)
    } else {
        let mut p = [0.0; 4];
        let best = (0..4)
            .min_by(|&a, &b| distances[a].total_cmp(&distances[b]))
            .unwrap_or(0);
        p[best] = 1.0;
        p
    };
    Ok(SubstitutionWeights {
        distances,
        weights,
        probabilities,
    })
}

/// Convenience: `π` multiples used throughout tests and builders.
pub fn quarter_turn_radians(n: u8) -> f64 {
    f64::from(n) * PI / 2.0
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn rz_quarter_turn_is_clifford() {
        assert!(Gate::rz(0, FRAC_PI_2).is_clifford());
        assert!(!Gate::rz(0, 0.3).is_clifford());
        assert!(Gate::P(0).is_clifford());
        assert!(Gate::rx(0, FRAC_PI_2).is_clifford());
        assert!(Gate::cnot(0, 1).is_clifford());
    }

    #[test]
    fn clifford_classification_tolerates_round_off() {
        assert!(Gate::rz(0, 3.0 * FRAC_PI_2 + 1e-12).is_clifford());
        assert!(Gate::rz(0, -1e-12).is_clifford());
        assert!(!Gate::rz(0, FRAC_PI_2 + 1e-6).is_clifford());
        assert_eq!(Angle::new(-FRAC_PI_2).clifford_power(), Some(3));
        assert_eq!(Angle::new(TAU - 1e-13).clifford_power(), Some(0));
    }

    #[test]
    fn canonicalization_is_idempotent() {
        for a in [-7.0, -0.1, 0.0, 1.0, 6.5, 100.0] {
            let c = Angle::new(a);
            assert!((0.0..TAU).contains(&c.radians()));
            assert_eq!(Angle::new(c.radians()), c);
        }
    }

    #[test]
    fn non_clifford_count_of_all_clifford_circuit_is_zero() {
        let c = Circuit::from_gates(
            2,
            [Gate::H(0), Gate::cnot(0, 1), Gate::rz(1, PI), Gate::S(0), Gate::P(1)],
        )
        .unwrap();
        assert_eq!(c.non_clifford_count(), 0);
    }

    #[test]
    fn substitution_weights_at_clifford_angles() {
        for norm in [DistanceNorm::Frobenius, DistanceNorm::FrobeniusModPhase, DistanceNorm::Operator] {
            let w = clifford_substitution_weights(Angle::new(0.0), 0.5, norm).unwrap();
            assert!(w.distances[0].abs() < 1e-15);
            assert!((w.weights[0] - 1.0).abs() < 1e-15);
            assert_eq!(w.argmax(), 0);
            let w = clifford_substitution_weights(Angle::new(FRAC_PI_2), 0.5, norm).unwrap();
            assert_eq!(w.argmax(), 1);
        }
    }

    /// Frozen fixture for angle 0.3, σ = 0.5, computed from explicit 2×2
    /// matrices `diag(e^{-iα/2}, e^{iα/2})` and `diag(e^{-inπ/4}, e^{inπ/4})`.
    #[test]
    fn substitution_weights_fixture_angle_0_3() {
        let oracle = |n: u8, mod_phase: bool| {
            let a = 0.3f64;
            let b = f64::from(n) * FRAC_PI_2;
            let u = [Complex64::cis(-a / 2.0), Complex64::cis(a / 2.0)];
            let v = [Complex64::cis(-b / 2.0), Complex64::cis(b / 2.0)];
            let d2 = if mod_phase {
                // brute-force over the global phase
                (0..20000)
                    .map(|k| {
                        let ph = Complex64::cis(k as f64 * TAU / 20000.0);
                        (u[0] - ph * v[0]).norm_sqr() + (u[1] - ph * v[1]).norm_sqr()
                    })
                    .fold(f64::INFINITY, f64::min)
            } else {
                (u[0] - v[0]).norm_sqr() + (u[1] - v[1]).norm_sqr()
            };
            (-d2 / 0.25).exp()
        };
        let frozen_literal = [0.835_551_951_270_066, 0.044_041_065_100_987_83, 1.229_393_154_782_667e-6, 8.457_493_366_780_845e-12];
        let frozen_mod_phase = [0.835_551_951_270_066, 0.044_041_065_100_987_83, 1.229_393_154_782_667e-6, 1.497_389_947_574_326e-3];
        let lit = clifford_substitution_weights(Angle::new(0.3), 0.5, DistanceNorm::Frobenius).unwrap();
        let modp = clifford_substitution_weights(Angle::new(0.3), 0.5, DistanceNorm::FrobeniusModPhase).unwrap();
        for n in 0..4u8 {
            let i = n as usize;
            assert!((lit.weights[i] - oracle(n, false)).abs() <= 1e-12 * oracle(n, false).max(1e-300));
            assert!((lit.weights[i] - frozen_literal[i]).abs() <= 1e-9 * frozen_literal[i]);
            // the brute-force phase grid is coarse; compare loosely to it and tightly to the fixture
            assert!((modp.weights[i] - oracle(n, true)).abs() <= 1e-6 * oracle(n, true).max(1e-12));
            assert!((modp.weights[i] - frozen_mod_phase[i]).abs() <= 1e-9 * frozen_mod_phase[i]);
        }
        let total: f64 = modp.probabilities.iter().sum();
        assert!((total - 1.0).abs() < 1e-15);
    }

    #[test]
    fn json_round_trip_and_errors() {
        let c = Circuit::from_gates(3, [Gate::H(0), Gate::rz(2, 0.431), Gate::cnot(0, 2), Gate::P(1)]).unwrap();
        let text = c.to_json();
        assert_eq!(Circuit::from_json(&text).unwrap(), c);

        let empty = Circuit::from_json(r#"{"qubits": 1, "gates": []}"#).unwrap();
        assert_eq!(empty.num_qubits(), 1);
        assert!(empty.is_empty());

        let err = Circuit::from_json(r#"{"qubits": 2, "gates": [{"kind": "H", "qubits": [2]}]}"#).unwrap_err();
        assert!(err.to_string().contains("gates[0].qubits[0]"), "{err}");
        let err = Circuit::from_json(r#"{"qubits": 2, "gates": [{"kind": "RZ", "qubits": [0]}]}"#).unwrap_err();
        assert!(err.to_string().contains("requires an angle"), "{err}");
        let err = Circuit::from_json("{\"qubits\": 2,\n \"gates\": [{\"kind\": 5}]}").unwrap_err();
        assert!(err.to_string().contains("line 2"), "{err}");
        assert!(Circuit::from_json(r#"{"qubits": 2, "gates": [], "extra": 1}"#).is_err());
    }

    #[test]
    fn observable_merges_and_parses() {
        let obs = Observable::from_json(r#"{"terms": [{"coeff": -2.0, "paulis": "XIIZ"}, {"coeff": 0.5, "paulis": "XIIZ"}, {"coeff": 1.0, "paulis": "IIII"}]}"#).unwrap();
        assert_eq!(obs.len(), 2);
        assert_eq!(obs.terms()[0].coeff, -1.5);
        assert_eq!(obs.terms()[0].paulis.to_string(), "XIIZ");
        assert_eq!(obs.normalized_trace(), 1.0);
        let back = Observable::from_json(&obs.to_json()).unwrap();
        assert_eq!(back, obs);
        let cancel = Observable::new([
            PauliTerm { coeff: 1.0, paulis: PauliString::parse("XY").unwrap() },
            PauliTerm { coeff: -1.0, paulis: PauliString::parse("XY").unwrap() },
        ])
        .unwrap();
        assert!(cancel.is_empty());
        assert!(Observable::from_json(r#"{"terms": [{"coeff": 1.0, "paulis": "XA"}]}"#).is_err());
    }
}
