//! Fermionic ladder-operator algebra.
//!
//! Terms are stored normal ordered: creation operators left of annihilation
//! operators, mode indices descending inside each group, with the
//! anticommutation sign folded into the coefficient.

use std::collections::BTreeMap;
use std::ops::{Add, Mul, Neg, Sub};

use nalgebra::DMatrix;
use thiserror::Error;

use crate::ansatz::Excitation;
use crate::integrals::{CrystalIntegrals, IntegralError};
use crate::{C64, PRUNE_TOL};

#[derive(Debug, Error)]
pub enum FermionError {
    #[error("invalid excitation: {0}")]
    InvalidExcitation(String),
    #[error(transparent)]
    Integrals(#[from] IntegralError),
}

/// A single creation (`dagger`) or annihilation operator on one mode.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Ladder {
    pub mode: usize,
    pub dagger: bool,
}

impl Ladder {
    pub fn create(mode: usize) -> Self {
        Ladder { mode, dagger: true }
    }

    pub fn annihilate(mode: usize) -> Self {
        Ladder { mode, dagger: false }
    }

    fn adjoint(self) -> Self {
        Ladder { mode: self.mode, dagger: !self.dagger }
    }
}

/// Linear combination of normal-ordered ladder products.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct FermionOperator {
    terms: BTreeMap<Vec<Ladder>, C64>,
}

impl FermionOperator {
    pub fn zero() -> Self {
        Self::default()
    }

    pub fn identity(coeff: C64) -> Self {
        let mut op = Self::zero();
        op.add_product(&[], coeff);
        op
    }

    /// `coeff · ops[0] ops[1] …`, normal ordered.
    pub fn product(ops: &[Ladder], coeff: C64) -> Self {
        let mut op = Self::zero();
        op.add_product(ops, coeff);
        op
    }

    /// Accumulate a (not necessarily ordered) product into the operator.
    pub fn add_product(&mut self, ops: &[Ladder], coeff: C64) {
        if coeff == C64::default() {
            return;
        }
        for (key, c) in normal_order_product(ops.to_vec(), coeff) {
            *self.terms.entry(key).or_default() += c;
        }
    }

    pub fn terms(&self) -> impl Iterator<Item = (&[Ladder], C64)> {
        self.terms.iter().map(|(k, c)| (k.as_slice(), *c))
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    /// Coefficient of a canonical (already normal-ordered) product.
    pub fn coefficient(&self, ops: &[Ladder]) -> C64 {
        self.terms.get(ops).copied().unwrap_or_default()
    }

    /// Largest mode index touched, if any.
    pub fn max_mode(&self) -> Option<usize> {
        self.terms.keys().flat_map(|k| k.iter().map(|l| l.mode)).max()
    }

    /// Drop coefficients with magnitude at or below `tol`.
    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.norm() > tol);
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = Self::zero();
        for (k, c) in &self.terms {
            out.terms.insert(k.clone(), c * factor);
        }
        out.prune(PRUNE_TOL);
        out
    }

    /// Hermitian conjugate.
    pub fn adjoint(&self) -> Self {
        let mut out = Self::zero();
        for (k, c) in &self.terms {
            let rev: Vec<Ladder> = k.iter().rev().map(|l| l.adjoint()).collect();
            out.add_product(&rev, c.conj());
        }
        out.prune(PRUNE_TOL);
        out
    }

    /// Largest coefficient deviation between two operators.
    pub fn distance(&self, other: &Self) -> f64 {
        let diff = self - other;
        diff.terms.values().map(|c| c.norm()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.distance(&self.adjoint()) <= tol
    }

    /// Dense matrix on the `2^n_modes` Fock space, basis index bit `j` = occupation of mode `j`.
    ///
    /// Ladder operators act directly on occupation bit strings with the sign
    /// `(-1)^(occupied modes below j)`; no qubit encoding is involved.
    pub fn to_dense(&self, n_modes: usize) -> DMatrix<C64> {
        let dim = 1usize << n_modes;
        let mut m = DMatrix::zeros(dim, dim);
        for (ops, c) in &self.terms {
            for col in 0..dim {
                if let Some((row, sign)) = act_on_occupations(ops, col as u64) {
                    m[(row as usize, col)] += c * sign;
                }
            }
        }
        m
    }
}

/// Apply a ladder product (rightmost first) to an occupation bit string.
pub fn act_on_occupations(ops: &[Ladder], mut state: u64) -> Option<(u64, f64)> {
    let mut sign = 1.0;
    for l in ops.iter().rev() {
        let bit = 1u64 << l.mode;
        let occupied = state & bit != 0;
        if occupied == l.dagger {
            return None;
        }
        if (state & (bit - 1)).count_ones() % 2 == 1 {
            sign = -sign;
        }
        state ^= bit;
    }
    Some((state, sign))
}

fn in_order(left: Ladder, right: Ladder) -> bool {
    match (left.dagger, right.dagger) {
        (true, false) => true,
        (false, true) => false,
        _ => left.mode > right.mode,
    }
}

/// Normal order one product via insertion sort, spawning contraction terms.
fn normal_order_product(ops: Vec<Ladder>, coeff: C64) -> Vec<(Vec<Ladder>, C64)> {
    let mut out = Vec::new();
    let mut pending = vec![(ops, coeff)];
    'term: while let Some((mut ops, mut c)) = pending.pop() {
        for i in 1..ops.len() {
            let mut j = i;
            while j > 0 {
                let (left, right) = (ops[j - 1], ops[j]);
                if left == right {
                    continue 'term;
                }
                if in_order(left, right) {
                    break;
                }
                ops.swap(j - 1, j);
                c = -c;
                if left.mode == right.mode {
                    // c_i c†_i = 1 - c†_i c_i
                    let mut contracted = ops.clone();
                    contracted.drain(j - 1..=j);
                    pending.push((contracted, -c));
                }
                j -= 1;
            }
        }
        out.push((ops, c));
    }
    out
}

impl Add for &FermionOperator {
    type Output = FermionOperator;
    fn add(self, rhs: &FermionOperator) -> FermionOperator {
        let mut out = self.clone();
        for (k, c) in &rhs.terms {
            *out.terms.entry(k.clone()).or_default() += c;
        }
        out.prune(PRUNE_TOL);
        out
    }
}

impl Sub for &FermionOperator {
    type Output = FermionOperator;
    fn sub(self, rhs: &FermionOperator) -> FermionOperator {
        self + &(-rhs)
    }
}

impl Neg for &FermionOperator {
    type Output = FermionOperator;
    fn neg(self) -> FermionOperator {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c = -*c);
        out
    }
}

impl Mul for &FermionOperator {
    type Output = FermionOperator;
    fn mul(self, rhs: &FermionOperator) -> FermionOperator {
        let mut out = FermionOperator::zero();
        for (ka, ca) in &self.terms {
            for (kb, cb) in &rhs.terms {
                let mut ops = ka.clone();
                ops.extend_from_slice(kb);
                out.add_product(&ops, ca * cb);
            }
        }
        out.prune(PRUNE_TOL);
        out
    }
}

/// Second-quantized crystal Hamiltonian over spin orbitals.
///
/// `Σ t[k]pq c†(kpσ) c(kqσ) + ½ Σ v[pq|rs] c†(pσ) c†(rτ) c(sτ) c(qσ)` plus the
/// reference-sector constant as an identity term.
pub fn build_hamiltonian(ints: &CrystalIntegrals) -> Result<FermionOperator, FermionError> {
    let map = ints.spin_orbitals();
    let mut h = FermionOperator::identity(C64::new(ints.sector_constant(ints.n_elec())?, 0.0));
    for k in 0..ints.n_k() {
        for p in 0..ints.n_orb() {
            for q in 0..ints.n_orb() {
                let t = ints.t(k, p, q);
                if t == C64::default() {
                    continue;
                }
                for spin in 0..2 {
                    h.add_product(&[Ladder::create(map.qubit(k, p, spin)), Ladder::annihilate(map.qubit(k, q, spin))], t);
                }
            }
        }
    }
    for (key, &v) in ints.two_body() {
        let [p, q, r, s] = key.0;
        for sigma in 0..2 {
            for tau in 0..2 {
                let ops = [
                    Ladder::create(map.qubit(p.k, p.p, sigma)),
                    Ladder::create(map.qubit(r.k, r.p, tau)),
                    Ladder::annihilate(map.qubit(s.k, s.p, tau)),
                    Ladder::annihilate(map.qubit(q.k, q.p, sigma)),
                ];
                h.add_product(&ops, 0.5 * v);
            }
        }
    }
    h.prune(PRUNE_TOL);
    Ok(h)
}

/// Anti-Hermitian cluster generator `a·T - conj(a)·T†` for one excitation.
pub fn excitation_generator(exc: &Excitation, amp: C64) -> Result<FermionOperator, FermionError> {
    let t = excitation_operator(exc)?;
    let mut g = t.scale(amp);
    g = &g - &t.adjoint().scale(amp.conj());
    Ok(g)
}

/// The bare excitation string `T = c†… c…` of an excitation.
pub fn excitation_operator(exc: &Excitation) -> Result<FermionOperator, FermionError> {
    let distinct = |idx: &[usize]| idx.iter().enumerate().all(|(i, a)| !idx[..i].contains(a));
    if !distinct(&exc.creation) || !distinct(&exc.annihilation) {
        return Err(FermionError::InvalidExcitation(format!(
            "repeated index in {:?} <- {:?}",
            exc.creation, exc.annihilation
        )));
    }
    if exc.creation.is_empty() || exc.creation.len() != exc.annihilation.len() {
        return Err(FermionError::InvalidExcitation("unbalanced excitation".into()));
    }
    let ops: Vec<Ladder> = exc
        .creation
        .iter()
        .map(|&m| Ladder::create(m))
        .chain(exc.annihilation.iter().map(|&m| Ladder::annihilate(m)))
        .collect();
    Ok(FermionOperator::product(&ops, C64::new(1.0, 0.0)))
}

/// Total number operator `Σ c†_j c_j` on `n_modes` modes.
pub fn number_operator(n_modes: usize) -> FermionOperator {
    let mut op = FermionOperator::zero();
    for j in 0..n_modes {
        op.add_product(&[Ladder::create(j), Ladder::annihilate(j)], C64::new(1.0, 0.0));
    }
    op
}
