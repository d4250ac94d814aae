//! Clifford data regression (CDR) error mitigation at desk scale.
//!
//! Near-Clifford training circuits are sampled with a Markov chain, evaluated
//! on an exact Pauli-propagation simulator and on a noisy density-matrix
//! simulator, and a linear map from noisy to exact expectation values is fitted
//! and applied to the circuit of interest. Two workloads are provided: QAOA
//! ground-state energies of the open transverse-field Ising chain, and
//! Hadamard-test phase estimation. Zero-noise extrapolation is included as a
//! baseline.

pub mod circuit;
pub mod error;
pub mod experiment;
mod par;
pub mod regression;
pub mod rng;
pub mod sim_exact;
pub mod sim_noisy;
pub mod trainingset;
pub mod workloads;

pub use circuit::{Angle, Circuit, Gate, GateKind, Observable, PauliString, PauliTerm};
pub use error::{CdrError, Result};
