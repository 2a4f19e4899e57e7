//! Variational quantum simulation of periodic materials.
//!
//! The crate assembles second-quantized crystal Hamiltonians from k-resolved
//! integrals, encodes them on qubits with the Jordan-Wigner map, and runs
//! unitary-coupled-cluster VQE on an exact statevector engine. Charged
//! excitations (quasiparticle bands) come from a subspace expansion over
//! ionization and electron-attachment operators, and an exact-diagonalization
//! oracle checks every stage.
//!
//! Module map:
//!
//! - [`integrals`]: KINT file format, k-mesh arithmetic, spin-orbital layout
//! - [`fermion`]: ladder-operator algebra and Hamiltonian assembly
//! - [`jw`]: Pauli strings, Pauli sums and the Jordan-Wigner map
//! - [`statevec`]: dense statevector engine
//! - [`ansatz`]: excitation enumeration and UCC circuit compilation
//! - [`optimize`] / [`vqe`]: BFGS minimizer and the VQE objective
//! - [`oracle`]: sector-resolved exact diagonalization and diagnostics
//! - [`qse`]: quantum subspace expansion and band assembly
//! - [`refdata`]: shipped reference files and their manifest

pub mod ansatz;
pub mod fermion;
pub mod integrals;
pub mod jw;
pub mod optimize;
pub mod oracle;
pub mod qse;
pub mod refdata;
pub mod statevec;
pub mod vqe;

pub use num_complex::Complex64 as C64;

pub use ansatz::{AnsatzCircuit, AnsatzVariant, Excitation};
pub use fermion::FermionOperator;
pub use integrals::{CrystalIntegrals, KMesh, SpinOrbitalMap};
pub use jw::{PauliString, PauliSum};
pub use statevec::StateVector;

/// Coefficient pruning threshold shared by the operator types.
pub const PRUNE_TOL: f64 = 1e-14;
