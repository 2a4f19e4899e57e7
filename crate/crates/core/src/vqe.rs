//! VQE objective, adjoint gradients and minimization.

use std::time::Instant;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ansatz::{AnsatzCircuit, AnsatzError, AnsatzVariant};
use crate::fermion::{build_hamiltonian, FermionError};
use crate::integrals::CrystalIntegrals;
use crate::jw::{jordan_wigner, JwError, PauliSum};
use crate::optimize::{self, BfgsSettings, Termination, TraceEntry};
use crate::statevec::{apply_operator, expectation, hartree_fock_state, inner_product, StateError, StateVector};

#[derive(Debug, Error)]
pub enum VqeError {
    #[error("expected {expected} parameters, got {got}")]
    ParamLengthMismatch { expected: usize, got: usize },
    #[error("qubit count mismatch: hamiltonian {hamiltonian}, circuit {circuit}, reference {reference}")]
    SizeMismatch { hamiltonian: usize, circuit: usize, reference: usize },
    #[error("hamiltonian is not Hermitian (imaginary coefficient {0:e})")]
    NotHermitian(f64),
    #[error("non-finite initial parameter")]
    NonFinite,
    #[error(transparent)]
    Ansatz(#[from] AnsatzError),
    #[error(transparent)]
    State(#[from] StateError),
    #[error(transparent)]
    Fermion(#[from] FermionError),
    #[error(transparent)]
    Jw(#[from] JwError),
}

pub const SCHEMA_VERSION: u32 = 1;

/// Jordan-Wigner image of the crystal Hamiltonian, sector constant included.
pub fn qubit_hamiltonian(ints: &CrystalIntegrals) -> Result<PauliSum, VqeError> {
    let h = build_hamiltonian(ints)?;
    Ok(jordan_wigner(&h, ints.n_qubits())?)
}

#[derive(Clone, Debug)]
pub struct VqeProblem {
    hamiltonian: PauliSum,
    circuit: AnsatzCircuit,
    reference: StateVector,
    pub settings: BfgsSettings,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct VqeResult {
    pub schema_version: u32,
    pub energy: f64,
    pub params: Vec<f64>,
    pub trace: Vec<TraceEntry>,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub evaluations: usize,
    pub wall_time_s: f64,
}

impl VqeProblem {
    pub fn new(hamiltonian: PauliSum, circuit: AnsatzCircuit, reference: StateVector) -> Result<Self, VqeError> {
        let (h, c, r) = (hamiltonian.n_qubits(), circuit.n_qubits(), reference.n_qubits());
        if h != c || h != r {
            return Err(VqeError::SizeMismatch { hamiltonian: h, circuit: c, reference: r });
        }
        let im = hamiltonian.max_imag();
        if im > 1e-10 {
            return Err(VqeError::NotHermitian(im));
        }
        Ok(VqeProblem { hamiltonian, circuit, reference, settings: BfgsSettings::default() })
    }

    /// Hamiltonian, compiled ansatz and Hartree-Fock reference for one file.
    pub fn for_integrals(
        ints: &CrystalIntegrals,
        variant: AnsatzVariant,
        momentum_filter: bool,
    ) -> Result<Self, VqeError> {
        let h = qubit_hamiltonian(ints)?;
        let circuit = AnsatzCircuit::for_integrals(ints, variant, momentum_filter)?;
        VqeProblem::new(h, circuit, hartree_fock_state(ints)?)
    }

    pub fn hamiltonian(&self) -> &PauliSum {
        &self.hamiltonian
    }

    pub fn circuit(&self) -> &AnsatzCircuit {
        &self.circuit
    }

    pub fn reference(&self) -> &StateVector {
        &self.reference
    }

    pub fn n_params(&self) -> usize {
        self.circuit.n_params()
    }

    fn check(&self, params: &[f64]) -> Result<(), VqeError> {
        if params.len() != self.n_params() {
            return Err(VqeError::ParamLengthMismatch { expected: self.n_params(), got: params.len() });
        }
        Ok(())
    }

    pub fn state(&self, params: &[f64]) -> Result<StateVector, VqeError> {
        self.check(params)?;
        Ok(self.circuit.prepare_state(params, &self.reference)?)
    }

    pub fn energy(&self, params: &[f64]) -> Result<f64, VqeError> {
        let s = self.state(params)?;
        Ok(expectation(&s, &self.hamiltonian)?.re)
    }

    pub fn gradient(&self, params: &[f64]) -> Result<Vec<f64>, VqeError> {
        Ok(self.energy_and_gradient(params)?.1)
    }

    /// Energy and gradient by one forward pass and one reverse sweep.
    ///
    /// With `U = Π_k exp(iθ_k G_k)`, `∂E/∂θ_k = 2·Re⟨λ_k| i G_k |φ_k⟩` where
    /// `φ_k` is the state right after gate `k` and `λ_k` is `H|ψ⟩` pulled back
    /// through the later gates.
    pub fn energy_and_gradient(&self, params: &[f64]) -> Result<(f64, Vec<f64>), VqeError> {
        let mut phi = self.state(params)?;
        let mut lambda = apply_operator(&phi, &self.hamiltonian)?;
        let energy = inner_product(&phi, &lambda)?.re;
        let mut grad = vec![0.0; params.len()];
        let groups: Vec<_> = self.circuit.groups().collect();
        for g in groups.iter().rev() {
            let theta = params[g.slot];
            let elem = g.rotation.generator_element(&lambda, &phi)?;
            // Re⟨λ|iG|φ⟩ = −Im⟨λ|G|φ⟩
            grad[g.slot] += -2.0 * elem.im;
            g.rotation.apply(&mut phi, -theta)?;
            g.rotation.apply(&mut lambda, -theta)?;
        }
        Ok((energy, grad))
    }

    /// BFGS from `initial`; a line-search failure returns the partial result.
    pub fn minimize(&self, initial: &[f64]) -> Result<VqeResult, VqeError> {
        self.check(initial)?;
        if initial.iter().any(|v| !v.is_finite()) {
            return Err(VqeError::NonFinite);
        }
        let start = Instant::now();
        let mut failure = None;
        let outcome = optimize::minimize(
            |x| match self.energy_and_gradient(x) {
                Ok(v) => v,
                Err(e) => {
                    failure.get_or_insert(e);
                    (f64::NAN, vec![f64::NAN; x.len()])
                }
            },
            initial.to_vec(),
            &self.settings,
        );
        if let Some(e) = failure {
            return Err(e);
        }
        Ok(VqeResult {
            schema_version: SCHEMA_VERSION,
            energy: outcome.value,
            params: outcome.x,
            trace: outcome.trace,
            converged: outcome.termination == Termination::Converged,
            termination: outcome.termination,
            iterations: outcome.iterations,
            evaluations: outcome.evaluations,
            wall_time_s: start.elapsed().as_secs_f64(),
        })
    }
}

/// Uniform perturbation in `[-scale, scale]` from a seeded generator.
pub fn perturbed_start(n: usize, scale: f64, seed: u64) -> Vec<f64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n).map(|_| rng.random_range(-scale..=scale)).collect()
}
