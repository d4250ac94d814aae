//! The two applications: QAOA on the open transverse-field Ising chain and
//! Hadamard-test phase estimation of a small commuting Hamiltonian.

pub mod ising;
pub mod optimize;
pub mod qpe;

pub use ising::{build_qaoa_circuit, ising_ground_energy, ising_observable, IsingSpec, QaoaParams};
pub use optimize::{nelder_mead, optimize_qaoa, NelderMeadResult, OptimizerConfig, QaoaMinimum};
pub use qpe::{
    ancilla_observable, binned_eigen_weights, build_qpe_circuits, exact_series, nnls, qpe_relative_error, spectral_decomposition, QpeSpec,
};
