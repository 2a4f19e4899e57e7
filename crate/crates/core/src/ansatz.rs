//! Excitation enumeration and disentangled UCC circuits.

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fermion::{excitation_operator, FermionError};
use crate::integrals::CrystalIntegrals;
use crate::jw::{jordan_wigner, JwError};
use crate::statevec::{PauliRotationGroup, StateError, StateVector};
use crate::C64;

#[derive(Debug, Error)]
pub enum AnsatzError {
    #[error("expected {expected} parameters, got {got}")]
    ParamLengthMismatch { expected: usize, got: usize },
    #[error("{n_elec} electrons do not fill whole bands over {n_k} k-points")]
    UnevenFilling { n_elec: usize, n_k: usize },
    #[error("unknown ansatz variant {0:?}")]
    UnknownVariant(String),
    #[error("generator image is not anti-Hermitian (deviation {0:e})")]
    NotAntiHermitian(f64),
    #[error(transparent)]
    Fermion(#[from] FermionError),
    #[error(transparent)]
    Jw(#[from] JwError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum AnsatzVariant {
    #[serde(rename = "bUCCSD-Real")]
    BUccsdReal,
    #[serde(rename = "iUCCSD")]
    IUccsd,
    #[serde(rename = "bUCCD-Real")]
    BUccdReal,
    #[serde(rename = "iUCCD")]
    IUccd,
}

impl AnsatzVariant {
    pub const ALL: [AnsatzVariant; 4] =
        [AnsatzVariant::BUccsdReal, AnsatzVariant::IUccsd, AnsatzVariant::BUccdReal, AnsatzVariant::IUccd];

    pub fn name(self) -> &'static str {
        match self {
            AnsatzVariant::BUccsdReal => "bUCCSD-Real",
            AnsatzVariant::IUccsd => "iUCCSD",
            AnsatzVariant::BUccdReal => "bUCCD-Real",
            AnsatzVariant::IUccd => "iUCCD",
        }
    }

    pub fn complex_amplitudes(self) -> bool {
        matches!(self, AnsatzVariant::IUccsd | AnsatzVariant::IUccd)
    }

    pub fn doubles_only(self) -> bool {
        matches!(self, AnsatzVariant::BUccdReal | AnsatzVariant::IUccd)
    }

    /// The i-variants keep crystal momentum by default, the b-variants do not.
    pub fn default_momentum_filter(self) -> bool {
        self.complex_amplitudes()
    }
}

impl fmt::Display for AnsatzVariant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for AnsatzVariant {
    type Err = AnsatzError;

    fn from_str(s: &str) -> Result<Self, AnsatzError> {
        AnsatzVariant::ALL
            .into_iter()
            .find(|v| v.name().eq_ignore_ascii_case(s))
            .ok_or_else(|| AnsatzError::UnknownVariant(s.to_string()))
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ExcitationKind {
    Single,
    Double,
}

/// Occupied → virtual excitation over spin orbitals (qubit indices).
///
/// Index lists are stored in descending order.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct Excitation {
    pub kind: ExcitationKind,
    pub creation: Vec<usize>,
    pub annihilation: Vec<usize>,
    /// Net crystal momentum transfer, mod n_k.
    pub residue: usize,
}

impl fmt::Display for Excitation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:?}<-{:?}", self.creation, self.annihilation)
    }
}

/// All spin-conserving occupied → virtual excitations out of the HF determinant.
pub fn enumerate_excitations(
    ints: &CrystalIntegrals,
    doubles_only: bool,
    momentum_filter: bool,
) -> Result<Vec<Excitation>, AnsatzError> {
    let n_occ = ints
        .occupied_per_k()
        .ok_or(AnsatzError::UnevenFilling { n_elec: ints.n_elec(), n_k: ints.n_k() })?;
    let map = ints.spin_orbitals();
    let n_k = ints.n_k();
    let mut occ = Vec::new();
    let mut virt = Vec::new();
    for q in 0..map.n_qubits() {
        let (_, p, _) = map.decode(q);
        if p < n_occ {
            occ.push(q);
        } else {
            virt.push(q);
        }
    }
    let k_of = |q: usize| map.decode(q).0;
    let spin_of = |q: usize| map.decode(q).2;
    let residue = |created: &[usize], removed: &[usize]| {
        let s: usize = created.iter().map(|&q| k_of(q)).sum::<usize>() + removed.len() * n_k
            - removed.iter().map(|&q| k_of(q)).sum::<usize>();
        s % n_k
    };

    let mut out = Vec::new();
    if !doubles_only {
        for &i in &occ {
            for &a in &virt {
                if spin_of(i) != spin_of(a) {
                    continue;
                }
                out.push(Excitation {
                    kind: ExcitationKind::Single,
                    creation: vec![a],
                    annihilation: vec![i],
                    residue: residue(&[a], &[i]),
                });
            }
        }
    }
    for (n, &i) in occ.iter().enumerate() {
        for &j in &occ[..n] {
            for (m, &a) in virt.iter().enumerate() {
                for &b in &virt[..m] {
                    let mut s_occ = [spin_of(i), spin_of(j)];
                    let mut s_virt = [spin_of(a), spin_of(b)];
                    s_occ.sort_unstable();
                    s_virt.sort_unstable();
                    if s_occ != s_virt {
                        continue;
                    }
                    out.push(Excitation {
                        kind: ExcitationKind::Double,
                        creation: vec![a, b],
                        annihilation: vec![i, j],
                        residue: residue(&[a, b], &[i, j]),
                    });
                }
            }
        }
    }
    if momentum_filter {
        out.retain(|e| e.residue == 0);
    }
    Ok(out)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum AmplitudePart {
    Real,
    Imaginary,
}

/// One parameter slot driving one commuting rotation group.
#[derive(Clone, Debug, PartialEq)]
pub struct ParamGroup {
    pub slot: usize,
    pub part: AmplitudePart,
    pub rotation: PauliRotationGroup,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzBlock {
    pub excitation: Excitation,
    pub groups: Vec<ParamGroup>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct AnsatzCircuit {
    variant: AnsatzVariant,
    n_qubits: usize,
    blocks: Vec<AnsatzBlock>,
    n_params: usize,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct CircuitStats {
    pub n_params: usize,
    pub n_rotation_gates: usize,
    pub n_blocks: usize,
}

/// Split `i·Σ w P` into real weights, checking the coefficients are imaginary.
fn rotation_weights(
    gen: &crate::jw::PauliSum,
) -> Result<Vec<(crate::jw::PauliString, f64)>, AnsatzError> {
    let dev = gen.max_real();
    if dev > 1e-12 {
        return Err(AnsatzError::NotAntiHermitian(dev));
    }
    Ok(gen.iter().map(|(p, c)| (*p, c.im)).collect())
}

/// Compile excitations into a disentangled UCC circuit.
///
/// Doubles come before singles; relative order inside each kind follows the
/// input. Doubles-only variants skip any singles present.
pub fn compile(excs: &[Excitation], variant: AnsatzVariant, n_qubits: usize) -> Result<AnsatzCircuit, AnsatzError> {
    let ordered = excs
        .iter()
        .filter(|e| e.kind == ExcitationKind::Double)
        .chain(excs.iter().filter(|e| e.kind == ExcitationKind::Single && !variant.doubles_only()));
    let mut blocks = Vec::new();
    let mut slot = 0;
    for exc in ordered {
        let t = excitation_operator(exc)?;
        let td = t.adjoint();
        let mut groups = Vec::new();
        let real = jordan_wigner(&(&t - &td), n_qubits)?;
        groups.push(ParamGroup {
            slot,
            part: AmplitudePart::Real,
            rotation: PauliRotationGroup::new(n_qubits, rotation_weights(&real)?)?,
        });
        slot += 1;
        if variant.complex_amplitudes() {
            let imag = jordan_wigner(&(&t + &td).scale(C64::new(0.0, 1.0)), n_qubits)?;
            groups.push(ParamGroup {
                slot,
                part: AmplitudePart::Imaginary,
                rotation: PauliRotationGroup::new(n_qubits, rotation_weights(&imag)?)?,
            });
            slot += 1;
        }
        blocks.push(AnsatzBlock { excitation: exc.clone(), groups });
    }
    Ok(AnsatzCircuit { variant, n_qubits, blocks, n_params: slot })
}

impl AnsatzCircuit {
    /// Enumerate and compile in one step.
    pub fn for_integrals(
        ints: &CrystalIntegrals,
        variant: AnsatzVariant,
        momentum_filter: bool,
    ) -> Result<AnsatzCircuit, AnsatzError> {
        let excs = enumerate_excitations(ints, variant.doubles_only(), momentum_filter)?;
        compile(&excs, variant, ints.n_qubits())
    }

    pub fn variant(&self) -> AnsatzVariant {
        self.variant
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn n_params(&self) -> usize {
        self.n_params
    }

    pub fn blocks(&self) -> &[AnsatzBlock] {
        &self.blocks
    }

    /// Parameter groups in application order.
    pub fn groups(&self) -> impl Iterator<Item = &ParamGroup> {
        self.blocks.iter().flat_map(|b| b.groups.iter())
    }

    pub fn check_params(&self, params: &[f64]) -> Result<(), AnsatzError> {
        if params.len() != self.n_params {
            return Err(AnsatzError::ParamLengthMismatch { expected: self.n_params, got: params.len() });
        }
        Ok(())
    }

    pub fn prepare_state(&self, params: &[f64], reference: &StateVector) -> Result<StateVector, AnsatzError> {
        self.check_params(params)?;
        let mut s = reference.clone();
        for g in self.groups() {
            g.rotation.apply(&mut s, params[g.slot])?;
        }
        Ok(s)
    }

    pub fn report(&self) -> CircuitStats {
        CircuitStats {
            n_params: self.n_params,
            n_rotation_gates: self.groups().map(|g| g.rotation.len()).sum(),
            n_blocks: self.blocks.len(),
        }
    }

    /// Plain-text listing, one `ROT <pauli> <weight> <slot>` line per rotation.
    pub fn export_listing(&self) -> String {
        let mut out = String::new();
        for g in self.groups() {
            for (p, w) in g.rotation.rotations() {
                out.push_str(&format!("ROT {p} {w:+.17e} {}\n", g.slot));
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn variant_names_round_trip() {
        for v in AnsatzVariant::ALL {
            assert_eq!(v.name().parse::<AnsatzVariant>().unwrap(), v);
        }
        assert!("UCCSDT".parse::<AnsatzVariant>().is_err());
    }

    #[test]
    fn empty_circuit() {
        let c = compile(&[], AnsatzVariant::BUccsdReal, 4).unwrap();
        assert_eq!(c.report(), CircuitStats::default());
        let hf = StateVector::basis(4, 0b0011).unwrap();
        assert_eq!(c.prepare_state(&[], &hf).unwrap(), hf);
    }

    #[test]
    fn single_on_two_qubits() {
        let exc = Excitation { kind: ExcitationKind::Single, creation: vec![1], annihilation: vec![0], residue: 0 };
        let c = compile(&[exc], AnsatzVariant::BUccsdReal, 2).unwrap();
        assert_eq!(c.report(), CircuitStats { n_params: 1, n_rotation_gates: 2, n_blocks: 1 });
        let rot = c.blocks()[0].groups[0].rotation.rotations();
        let listing: Vec<(String, f64)> = rot.iter().map(|(p, w)| (p.to_string(), *w)).collect();
        assert_eq!(listing, vec![("YX".to_string(), 0.5), ("XY".to_string(), -0.5)]);
        assert_eq!(c.export_listing().lines().count(), 2);
        assert!(c.export_listing().starts_with("ROT YX +5.00000000000000000e-1 0"));
    }

    #[test]
    fn param_length_checked() {
        let c = compile(&[], AnsatzVariant::IUccd, 2).unwrap();
        let s = StateVector::zero_state(2).unwrap();
        assert!(matches!(
            c.prepare_state(&[0.1], &s),
            Err(AnsatzError::ParamLengthMismatch { expected: 0, got: 1 })
        ));
    }
}
