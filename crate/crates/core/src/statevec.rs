//! Dense statevector engine.
//!
//! Basis index bit `q` is the occupation of qubit `q`. Pauli strings act via
//! their masks: `P|b⟩ = i^ny (-1)^popcount(b&z) |b ⊕ x⟩`.

use std::fs::File;
use std::io::{BufReader, BufWriter, Read, Write};
use std::path::{Path, PathBuf};

use thiserror::Error;

use crate::integrals::CrystalIntegrals;
use crate::jw::{times_i_pow, PauliString, PauliSum};
use crate::C64;

/// Largest register the engine will allocate.
pub const MAX_STATE_QUBITS: usize = 30;

#[derive(Debug, Error)]
pub enum StateError {
    #[error("qubit count mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("restricted reference needs an even electron count, got {0}")]
    OddElectronCount(usize),
    #[error("{n_elec} electrons cannot fill whole bands over {n_k} k-points")]
    UnevenFilling { n_elec: usize, n_k: usize },
    #[error("more electrons ({n_elec}) than spin orbitals ({n_qubits})")]
    Overfilled { n_elec: usize, n_qubits: usize },
    #[error("{0} qubits exceeds the engine limit")]
    TooManyQubits(usize),
    #[error("amplitude count {got} does not match 2^{n_qubits}")]
    BadLength { n_qubits: usize, got: usize },
    #[error("cannot access {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("state dump: {0}")]
    Format(String),
}

#[derive(Clone, Debug, PartialEq)]
pub struct StateVector {
    n_qubits: usize,
    amps: Vec<C64>,
    normalized: bool,
}

impl StateVector {
    /// Computational basis state `|index⟩`.
    pub fn basis(n_qubits: usize, index: u64) -> Result<Self, StateError> {
        if n_qubits > MAX_STATE_QUBITS {
            return Err(StateError::TooManyQubits(n_qubits));
        }
        let mut amps = vec![C64::default(); 1 << n_qubits];
        let slot = amps.get_mut(index as usize).ok_or(StateError::BadLength { n_qubits, got: index as usize })?;
        *slot = C64::new(1.0, 0.0);
        Ok(StateVector { n_qubits, amps, normalized: true })
    }

    pub fn zero_state(n_qubits: usize) -> Result<Self, StateError> {
        Self::basis(n_qubits, 0)
    }

    /// Wrap raw amplitudes; the normalized flag is set if the norm is 1 to 1e-12.
    pub fn from_amplitudes(n_qubits: usize, amps: Vec<C64>) -> Result<Self, StateError> {
        if n_qubits > MAX_STATE_QUBITS {
            return Err(StateError::TooManyQubits(n_qubits));
        }
        if amps.len() != 1 << n_qubits {
            return Err(StateError::BadLength { n_qubits, got: amps.len() });
        }
        let mut s = StateVector { n_qubits, amps, normalized: false };
        s.normalized = (s.norm() - 1.0).abs() <= 1e-12;
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn amplitudes(&self) -> &[C64] {
        &self.amps
    }

    pub fn amplitude(&self, index: u64) -> C64 {
        self.amps[index as usize]
    }

    pub fn is_normalized(&self) -> bool {
        self.normalized
    }

    pub fn norm(&self) -> f64 {
        self.amps.iter().map(|a| a.norm_sqr()).sum::<f64>().sqrt()
    }

    /// Rescale to unit norm; a zero vector is left untouched.
    pub fn normalize(&mut self) -> f64 {
        let n = self.norm();
        if n > 0.0 {
            self.amps.iter_mut().for_each(|a| *a /= n);
            self.normalized = true;
        }
        n
    }

    pub fn scale(&mut self, factor: C64) {
        self.amps.iter_mut().for_each(|a| *a *= factor);
        self.normalized = self.normalized && (factor.norm() - 1.0).abs() <= 1e-12;
    }

    /// `self += factor · other`.
    pub fn axpy(&mut self, factor: C64, other: &StateVector) -> Result<(), StateError> {
        check_size(self.n_qubits, other.n_qubits)?;
        for (a, b) in self.amps.iter_mut().zip(&other.amps) {
            *a += factor * b;
        }
        self.normalized = false;
        Ok(())
    }

    /// Indices with a nonzero amplitude.
    pub fn support(&self) -> Vec<u64> {
        self.amps
            .iter()
            .enumerate()
            .filter(|(_, a)| a.re != 0.0 || a.im != 0.0)
            .map(|(i, _)| i as u64)
            .collect()
    }

    /// `P|s⟩` in place.
    pub fn apply_pauli(&mut self, p: &PauliString) -> Result<(), StateError> {
        check_size(self.n_qubits, p.n_qubits())?;
        let x = p.x_mask();
        if x == 0 {
            for (b, a) in self.amps.iter_mut().enumerate() {
                *a *= p.phase_on(b as u64);
            }
            return Ok(());
        }
        let hi = 1u64 << (63 - x.leading_zeros());
        for b in 0..self.amps.len() as u64 {
            if b & hi != 0 {
                continue;
            }
            let c = b ^ x;
            let (ab, ac) = (self.amps[b as usize], self.amps[c as usize]);
            self.amps[c as usize] = ab * p.phase_on(b);
            self.amps[b as usize] = ac * p.phase_on(c);
        }
        Ok(())
    }

    /// `exp(i·angle·P)|s⟩ = cos(angle)|s⟩ + i·sin(angle)·P|s⟩` in place.
    pub fn apply_pauli_rotation(&mut self, p: &PauliString, angle: f64) -> Result<(), StateError> {
        check_size(self.n_qubits, p.n_qubits())?;
        let (sin, cos) = angle.sin_cos();
        let x = p.x_mask();
        if x == 0 {
            for (b, a) in self.amps.iter_mut().enumerate() {
                let g = p.phase_on(b as u64);
                *a *= C64::new(cos, 0.0) + C64::new(0.0, sin) * g;
            }
            return Ok(());
        }
        let hi = 1u64 << (63 - x.leading_zeros());
        let isin = C64::new(0.0, sin);
        for b in 0..self.amps.len() as u64 {
            if b & hi != 0 {
                continue;
            }
            let c = b ^ x;
            let (ab, ac) = (self.amps[b as usize], self.amps[c as usize]);
            self.amps[b as usize] = cos * ab + isin * p.phase_on(c) * ac;
            self.amps[c as usize] = cos * ac + isin * p.phase_on(b) * ab;
        }
        Ok(())
    }

    /// `⟨self|other⟩`.
    pub fn inner(&self, other: &StateVector) -> Result<C64, StateError> {
        inner_product(self, other)
    }

    /// Write the binary dump: u64 LE qubit count, then LE (re, im) doubles.
    pub fn write_dump(&self, path: &Path) -> Result<(), StateError> {
        let io = |source| StateError::Io { path: path.to_path_buf(), source };
        let mut w = BufWriter::new(File::create(path).map_err(io)?);
        w.write_all(&(self.n_qubits as u64).to_le_bytes()).map_err(io)?;
        for a in &self.amps {
            w.write_all(&a.re.to_le_bytes()).map_err(io)?;
            w.write_all(&a.im.to_le_bytes()).map_err(io)?;
        }
        w.flush().map_err(io)
    }

    pub fn read_dump(path: &Path) -> Result<Self, StateError> {
        let io = |source| StateError::Io { path: path.to_path_buf(), source };
        let mut r = BufReader::new(File::open(path).map_err(io)?);
        let mut buf = Vec::new();
        r.read_to_end(&mut buf).map_err(io)?;
        if buf.len() < 8 {
            return Err(StateError::Format("missing header".into()));
        }
        let n = u64::from_le_bytes(buf[..8].try_into().expect("8 bytes")) as usize;
        if n > MAX_STATE_QUBITS {
            return Err(StateError::TooManyQubits(n));
        }
        let body = &buf[8..];
        if body.len() != 16 << n {
            return Err(StateError::Format(format!("expected {} bytes of amplitudes, got {}", 16 << n, body.len())));
        }
        let amps = body
            .chunks_exact(16)
            .map(|c| {
                C64::new(
                    f64::from_le_bytes(c[..8].try_into().expect("8 bytes")),
                    f64::from_le_bytes(c[8..].try_into().expect("8 bytes")),
                )
            })
            .collect();
        Self::from_amplitudes(n, amps)
    }
}

fn check_size(left: usize, right: usize) -> Result<(), StateError> {
    if left != right {
        return Err(StateError::SizeMismatch { left, right });
    }
    Ok(())
}

/// Occupation bit string of the restricted HF determinant.
///
/// The lowest `n_elec / (2·n_k)` bands are doubly occupied at every k.
pub fn hartree_fock_bits(ints: &CrystalIntegrals) -> Result<u64, StateError> {
    let n_elec = ints.n_elec();
    if n_elec % 2 == 1 {
        return Err(StateError::OddElectronCount(n_elec));
    }
    if n_elec > ints.n_qubits() {
        return Err(StateError::Overfilled { n_elec, n_qubits: ints.n_qubits() });
    }
    let n_occ = ints.occupied_per_k().ok_or(StateError::UnevenFilling { n_elec, n_k: ints.n_k() })?;
    let map = ints.spin_orbitals();
    let mut bits = 0u64;
    for k in 0..ints.n_k() {
        for p in 0..n_occ {
            for spin in 0..2 {
                bits |= 1 << map.qubit(k, p, spin);
            }
        }
    }
    Ok(bits)
}

pub fn hartree_fock_state(ints: &CrystalIntegrals) -> Result<StateVector, StateError> {
    StateVector::basis(ints.n_qubits(), hartree_fock_bits(ints)?)
}

/// `⟨a|b⟩`, conjugating `a`.
pub fn inner_product(a: &StateVector, b: &StateVector) -> Result<C64, StateError> {
    check_size(a.n_qubits, b.n_qubits)?;
    Ok(a.amps.iter().zip(&b.amps).map(|(x, y)| x.conj() * y).sum())
}

/// `O|s⟩`, unnormalized.
pub fn apply_operator(s: &StateVector, op: &PauliSum) -> Result<StateVector, StateError> {
    check_size(s.n_qubits, op.n_qubits())?;
    let support = s.support();
    let mut out = vec![C64::default(); s.amps.len()];
    for (p, &c) in op.iter() {
        let (x, z, ny) = (p.x_mask(), p.z_mask(), p.y_count());
        for &b in &support {
            let k = ny + 2 * ((b & z).count_ones() & 1);
            out[(b ^ x) as usize] += times_i_pow(c * s.amps[b as usize], k);
        }
    }
    Ok(StateVector { n_qubits: s.n_qubits, amps: out, normalized: false })
}

/// `⟨s|O|s⟩`.
pub fn expectation(s: &StateVector, op: &PauliSum) -> Result<C64, StateError> {
    check_size(s.n_qubits, op.n_qubits())?;
    let support = s.support();
    let mut total = C64::default();
    for (p, &c) in op.iter() {
        let (x, z, ny) = (p.x_mask(), p.z_mask(), p.y_count());
        let mut acc = C64::default();
        for &b in &support {
            let k = ny + 2 * ((b & z).count_ones() & 1);
            acc += s.amps[(b ^ x) as usize].conj() * times_i_pow(s.amps[b as usize], k);
        }
        total += c * acc;
    }
    Ok(total)
}

/// `⟨a|O|b⟩`.
pub fn matrix_element(a: &StateVector, op: &PauliSum, b: &StateVector) -> Result<C64, StateError> {
    inner_product(a, &apply_operator(b, op)?)
}

/// `exp(iθ Σ_j w_j P_j)` for mutually commuting strings sharing one x-mask.
///
/// Such a generator `G` maps `|b⟩` to `g(b)|b ⊕ x⟩`, so the exponential acts
/// as an exact 2×2 rotation on each pair `(b, b ⊕ x)`. The scalar `g(b)`
/// factors into a sign from the z-bits outside `x` times a table over the
/// bits of `b` inside `x`. Groups that do not fit this shape fall back to
/// sequential single-string rotations, which give the same unitary.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliRotationGroup {
    n_qubits: usize,
    rotations: Vec<(PauliString, f64)>,
    kernel: Option<Kernel>,
}

#[derive(Clone, Debug, PartialEq)]
struct Kernel {
    x: u64,
    z_outer: u64,
    positions: Vec<u32>,
    table: Vec<C64>,
}

const MAX_KERNEL_BITS: u32 = 12;

impl Kernel {
    fn build(rotations: &[(PauliString, f64)]) -> Option<Kernel> {
        let first = rotations.first()?.0;
        let x = first.x_mask();
        if x == 0 || x.count_ones() > MAX_KERNEL_BITS {
            return None;
        }
        let z_outer = first.z_mask() & !x;
        for (i, (p, _)) in rotations.iter().enumerate() {
            if p.x_mask() != x || p.z_mask() & !x != z_outer {
                return None;
            }
            if rotations[..i].iter().any(|(q, _)| !q.commutes_with(p)) {
                return None;
            }
        }
        let positions: Vec<u32> = (0..64).filter(|q| x >> q & 1 == 1).collect();
        let mut table = vec![C64::default(); 1 << positions.len()];
        for (idx, slot) in table.iter_mut().enumerate() {
            let b = spread(idx, &positions);
            for (p, w) in rotations {
                let k = p.y_count() + 2 * ((b & p.z_mask() & x).count_ones() & 1);
                *slot += times_i_pow(C64::new(*w, 0.0), k);
            }
        }
        Some(Kernel { x, z_outer, positions, table })
    }

    #[inline]
    fn g(&self, b: u64) -> C64 {
        let mut idx = 0usize;
        for (i, &q) in self.positions.iter().enumerate() {
            idx |= ((b >> q & 1) as usize) << i;
        }
        let v = self.table[idx];
        if (b & self.z_outer).count_ones() & 1 == 1 {
            -v
        } else {
            v
        }
    }
}

fn spread(idx: usize, positions: &[u32]) -> u64 {
    positions.iter().enumerate().fold(0u64, |acc, (i, &q)| acc | (((idx >> i) & 1) as u64) << q)
}

impl PauliRotationGroup {
    /// `rotations` are applied as `Π_j exp(iθ w_j P_j)` in the given order.
    pub fn new(n_qubits: usize, rotations: Vec<(PauliString, f64)>) -> Result<Self, StateError> {
        for (p, _) in &rotations {
            check_size(n_qubits, p.n_qubits())?;
        }
        let kernel = Kernel::build(&rotations);
        Ok(PauliRotationGroup { n_qubits, rotations, kernel })
    }

    pub fn rotations(&self) -> &[(PauliString, f64)] {
        &self.rotations
    }

    pub fn len(&self) -> usize {
        self.rotations.len()
    }

    pub fn is_empty(&self) -> bool {
        self.rotations.is_empty()
    }

    pub fn is_fused(&self) -> bool {
        self.kernel.is_some()
    }

    /// Generator `G = Σ_j w_j P_j` as a Pauli sum.
    pub fn generator(&self) -> PauliSum {
        PauliSum::from_terms(self.n_qubits, self.rotations.iter().map(|(p, w)| (*p, C64::new(*w, 0.0))))
            .expect("sizes checked at construction")
    }

    /// `exp(iθG)` in place.
    pub fn apply(&self, s: &mut StateVector, theta: f64) -> Result<(), StateError> {
        check_size(self.n_qubits, s.n_qubits)?;
        let Some(kernel) = &self.kernel else {
            for (p, w) in &self.rotations {
                s.apply_pauli_rotation(p, theta * w)?;
            }
            return Ok(());
        };
        if theta == 0.0 {
            return Ok(());
        }
        let x = kernel.x;
        let hi = 1u64 << (63 - x.leading_zeros());
        for b in 0..s.amps.len() as u64 {
            if b & hi != 0 {
                continue;
            }
            let g = kernel.g(b);
            let mag = g.norm();
            if mag == 0.0 {
                continue;
            }
            let c = b ^ x;
            let (sin, cos) = (theta * mag).sin_cos();
            let f = C64::new(0.0, sin / mag);
            let (ab, ac) = (s.amps[b as usize], s.amps[c as usize]);
            // G restricted to the pair is [[0, conj g], [g, 0]]
            s.amps[c as usize] = cos * ac + f * g * ab;
            s.amps[b as usize] = cos * ab + f * g.conj() * ac;
        }
        Ok(())
    }

    /// `⟨bra|G|ket⟩`.
    pub fn generator_element(&self, bra: &StateVector, ket: &StateVector) -> Result<C64, StateError> {
        check_size(self.n_qubits, bra.n_qubits)?;
        check_size(self.n_qubits, ket.n_qubits)?;
        let Some(kernel) = &self.kernel else {
            let gk = apply_operator(ket, &self.generator())?;
            return inner_product(bra, &gk);
        };
        let x = kernel.x;
        let mut acc = C64::default();
        for (b, a) in ket.amps.iter().enumerate() {
            if a.re == 0.0 && a.im == 0.0 {
                continue;
            }
            let b = b as u64;
            acc += bra.amps[(b ^ x) as usize].conj() * kernel.g(b) * a;
        }
        Ok(acc)
    }
}
