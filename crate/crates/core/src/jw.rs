//! Pauli strings, Pauli sums and the Jordan-Wigner map.
//!
//! A string is held as two bitmasks: bit `j` of `x` and `z` select the letter
//! on qubit `j` (`I`=00, `X`=10, `Z`=01, `Y`=11). The operator is
//! `i^popcount(x&z) · X^x · Z^z`, so `Y = iXZ` as usual.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::{Add, Mul};
use std::str::FromStr;

use nalgebra::DMatrix;
use thiserror::Error;

use crate::fermion::{FermionOperator, Ladder};
use crate::{C64, PRUNE_TOL};

pub const MAX_QUBITS: usize = 64;

#[derive(Debug, Error, PartialEq)]
pub enum JwError {
    #[error("mode index {index} out of range for {n_qubits} qubits")]
    IndexOutOfRange { index: usize, n_qubits: usize },
    #[error("qubit count mismatch: {left} vs {right}")]
    SizeMismatch { left: usize, right: usize },
    #[error("{0} qubits exceeds the supported maximum of 64")]
    TooManyQubits(usize),
    #[error("cannot parse Pauli string {0:?}")]
    Parse(String),
}

/// Power of `i`: 0 → 1, 1 → i, 2 → −1, 3 → −i.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Phase(pub u8);

impl Phase {
    pub fn to_complex(self) -> C64 {
        match self.0 & 3 {
            0 => C64::new(1.0, 0.0),
            1 => C64::new(0.0, 1.0),
            2 => C64::new(-1.0, 0.0),
            _ => C64::new(0.0, -1.0),
        }
    }
}

/// Multiply by `i^k` without rounding.
#[inline]
pub fn times_i_pow(c: C64, k: u32) -> C64 {
    match k & 3 {
        0 => c,
        1 => C64::new(-c.im, c.re),
        2 => -c,
        _ => C64::new(c.im, -c.re),
    }
}

#[derive(Clone, Copy, PartialEq, Eq, Hash)]
pub struct PauliString {
    n_qubits: usize,
    x: u64,
    z: u64,
}

impl PauliString {
    pub fn identity(n_qubits: usize) -> Self {
        PauliString { n_qubits, x: 0, z: 0 }
    }

    pub fn from_masks(n_qubits: usize, x: u64, z: u64) -> Result<Self, JwError> {
        if n_qubits > MAX_QUBITS {
            return Err(JwError::TooManyQubits(n_qubits));
        }
        let limit = if n_qubits == 64 { u64::MAX } else { (1u64 << n_qubits) - 1 };
        if (x | z) & !limit != 0 {
            let index = 63 - ((x | z) & !limit).leading_zeros() as usize;
            return Err(JwError::IndexOutOfRange { index, n_qubits });
        }
        Ok(PauliString { n_qubits, x, z })
    }

    /// One letter on qubit `q`.
    pub fn single(n_qubits: usize, q: usize, letter: char) -> Result<Self, JwError> {
        if q >= n_qubits {
            return Err(JwError::IndexOutOfRange { index: q, n_qubits });
        }
        let (x, z) = match letter {
            'I' => (0, 0),
            'X' => (1, 0),
            'Y' => (1, 1),
            'Z' => (0, 1),
            _ => return Err(JwError::Parse(letter.to_string())),
        };
        Self::from_masks(n_qubits, x << q, z << q)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn x_mask(&self) -> u64 {
        self.x
    }

    pub fn z_mask(&self) -> u64 {
        self.z
    }

    pub fn is_identity(&self) -> bool {
        self.x == 0 && self.z == 0
    }

    pub fn y_count(&self) -> u32 {
        (self.x & self.z).count_ones()
    }

    /// Number of non-identity letters.
    pub fn weight(&self) -> u32 {
        (self.x | self.z).count_ones()
    }

    pub fn letter(&self, q: usize) -> char {
        match ((self.x >> q) & 1, (self.z >> q) & 1) {
            (0, 0) => 'I',
            (1, 0) => 'X',
            (1, 1) => 'Y',
            _ => 'Z',
        }
    }

    pub fn commutes_with(&self, other: &PauliString) -> bool {
        ((self.x & other.z) ^ (self.z & other.x)).count_ones().is_multiple_of(2)
    }

    /// `P|b⟩ = phase(b)·|b ⊕ x⟩`.
    #[inline]
    pub fn phase_on(&self, b: u64) -> C64 {
        let sign = if (b & self.z).count_ones() % 2 == 1 { 2 } else { 0 };
        Phase(((self.y_count() + sign) & 3) as u8).to_complex()
    }

    /// Dense `2^n × 2^n` matrix; only for small checks.
    pub fn to_dense(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for b in 0..dim as u64 {
            m[((b ^ self.x) as usize, b as usize)] = self.phase_on(b);
        }
        m
    }
}

impl Ord for PauliString {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        (self.x, self.z, self.n_qubits).cmp(&(other.x, other.z, other.n_qubits))
    }
}

impl PartialOrd for PauliString {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}

impl fmt::Display for PauliString {
    /// Qubit 0 is the leftmost letter.
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for q in 0..self.n_qubits {
            write!(f, "{}", self.letter(q))?;
        }
        Ok(())
    }
}

impl fmt::Debug for PauliString {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "PauliString({self})")
    }
}

impl FromStr for PauliString {
    type Err = JwError;

    fn from_str(s: &str) -> Result<Self, JwError> {
        let n = s.chars().count();
        if n > MAX_QUBITS {
            return Err(JwError::TooManyQubits(n));
        }
        let (mut x, mut z) = (0u64, 0u64);
        for (q, c) in s.chars().enumerate() {
            match c {
                'I' => {}
                'X' => x |= 1 << q,
                'Y' => {
                    x |= 1 << q;
                    z |= 1 << q;
                }
                'Z' => z |= 1 << q,
                _ => return Err(JwError::Parse(s.to_string())),
            }
        }
        Ok(PauliString { n_qubits: n, x, z })
    }
}

/// `a·b = phase · c`.
pub fn pauli_product(a: &PauliString, b: &PauliString) -> Result<(PauliString, Phase), JwError> {
    if a.n_qubits != b.n_qubits {
        return Err(JwError::SizeMismatch { left: a.n_qubits, right: b.n_qubits });
    }
    Ok(product_unchecked(a, b))
}

#[inline]
fn product_unchecked(a: &PauliString, b: &PauliString) -> (PauliString, Phase) {
    let x = a.x ^ b.x;
    let z = a.z ^ b.z;
    // i^ya X^xa Z^za · i^yb X^xb Z^zb = i^(ya+yb) (-1)^|za&xb| X^x Z^z
    let k = a.y_count() + b.y_count() + 2 * (a.z & b.x).count_ones() + 4 * 64 - (x & z).count_ones();
    (PauliString { n_qubits: a.n_qubits, x, z }, Phase((k & 3) as u8))
}

/// Weighted sum of Pauli strings on a fixed register.
#[derive(Clone, Debug, PartialEq)]
pub struct PauliSum {
    n_qubits: usize,
    terms: BTreeMap<PauliString, C64>,
}

impl PauliSum {
    pub fn zero(n_qubits: usize) -> Self {
        PauliSum { n_qubits, terms: BTreeMap::new() }
    }

    pub fn identity(n_qubits: usize, coeff: C64) -> Self {
        let mut s = Self::zero(n_qubits);
        s.add_term(PauliString::identity(n_qubits), coeff).expect("same size");
        s
    }

    pub fn from_terms(n_qubits: usize, terms: impl IntoIterator<Item = (PauliString, C64)>) -> Result<Self, JwError> {
        let mut s = Self::zero(n_qubits);
        for (p, c) in terms {
            s.add_term(p, c)?;
        }
        s.prune(PRUNE_TOL);
        Ok(s)
    }

    pub fn n_qubits(&self) -> usize {
        self.n_qubits
    }

    pub fn add_term(&mut self, p: PauliString, coeff: C64) -> Result<(), JwError> {
        if p.n_qubits != self.n_qubits {
            return Err(JwError::SizeMismatch { left: self.n_qubits, right: p.n_qubits });
        }
        *self.terms.entry(p).or_default() += coeff;
        Ok(())
    }

    pub fn prune(&mut self, tol: f64) {
        self.terms.retain(|_, c| c.norm() > tol);
    }

    pub fn len(&self) -> usize {
        self.terms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.terms.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&PauliString, &C64)> {
        self.terms.iter()
    }

    pub fn coefficient(&self, p: &PauliString) -> C64 {
        self.terms.get(p).copied().unwrap_or_default()
    }

    /// Coefficient of the identity string.
    pub fn constant(&self) -> C64 {
        self.coefficient(&PauliString::identity(self.n_qubits))
    }

    pub fn scale(&self, factor: C64) -> Self {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c *= factor);
        out.prune(PRUNE_TOL);
        out
    }

    pub fn adjoint(&self) -> Self {
        let mut out = self.clone();
        out.terms.values_mut().for_each(|c| *c = c.conj());
        out
    }

    /// Largest imaginary part of any coefficient.
    pub fn max_imag(&self) -> f64 {
        self.terms.values().map(|c| c.im.abs()).fold(0.0, f64::max)
    }

    pub fn max_real(&self) -> f64 {
        self.terms.values().map(|c| c.re.abs()).fold(0.0, f64::max)
    }

    pub fn is_hermitian(&self, tol: f64) -> bool {
        self.max_imag() <= tol
    }

    pub fn checked_add(&self, rhs: &PauliSum) -> Result<PauliSum, JwError> {
        if self.n_qubits != rhs.n_qubits {
            return Err(JwError::SizeMismatch { left: self.n_qubits, right: rhs.n_qubits });
        }
        let mut out = self.clone();
        for (p, c) in &rhs.terms {
            *out.terms.entry(*p).or_default() += c;
        }
        out.prune(PRUNE_TOL);
        Ok(out)
    }

    pub fn checked_mul(&self, rhs: &PauliSum) -> Result<PauliSum, JwError> {
        if self.n_qubits != rhs.n_qubits {
            return Err(JwError::SizeMismatch { left: self.n_qubits, right: rhs.n_qubits });
        }
        let mut out = PauliSum::zero(self.n_qubits);
        for (a, ca) in &self.terms {
            for (b, cb) in &rhs.terms {
                let (p, ph) = product_unchecked(a, b);
                *out.terms.entry(p).or_default() += times_i_pow(ca * cb, ph.0 as u32);
            }
        }
        out.prune(PRUNE_TOL);
        Ok(out)
    }

    /// Largest coefficient deviation between two sums of equal size.
    pub fn distance(&self, other: &PauliSum) -> f64 {
        let mut d: f64 = 0.0;
        for (p, c) in &self.terms {
            d = d.max((c - other.coefficient(p)).norm());
        }
        for (p, c) in &other.terms {
            if !self.terms.contains_key(p) {
                d = d.max(c.norm());
            }
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let dim = 1usize << self.n_qubits;
        let mut m = DMatrix::zeros(dim, dim);
        for (p, c) in &self.terms {
            for b in 0..dim as u64 {
                m[((b ^ p.x) as usize, b as usize)] += c * p.phase_on(b);
            }
        }
        m
    }
}

impl Add for &PauliSum {
    type Output = PauliSum;
    fn add(self, rhs: &PauliSum) -> PauliSum {
        self.checked_add(rhs).expect("PauliSum size mismatch")
    }
}

impl Mul for &PauliSum {
    type Output = PauliSum;
    fn mul(self, rhs: &PauliSum) -> PauliSum {
        self.checked_mul(rhs).expect("PauliSum size mismatch")
    }
}

/// JW image of one ladder operator: `½ X_j Z_{<j} ∓ ½ i Y_j Z_{<j}`.
fn ladder_image(l: Ladder, n_qubits: usize) -> [(PauliString, C64); 2] {
    let parity = (1u64 << l.mode) - 1;
    let bit = 1u64 << l.mode;
    let xs = PauliString { n_qubits, x: bit, z: parity };
    let ys = PauliString { n_qubits, x: bit, z: parity | bit };
    let half = if l.dagger { -0.5 } else { 0.5 };
    [(xs, C64::new(0.5, 0.0)), (ys, C64::new(0.0, half))]
}

/// Jordan-Wigner encode `op` on `n_qubits` qubits.
pub fn jordan_wigner(op: &FermionOperator, n_qubits: usize) -> Result<PauliSum, JwError> {
    if n_qubits > MAX_QUBITS {
        return Err(JwError::TooManyQubits(n_qubits));
    }
    let mut out = PauliSum::zero(n_qubits);
    let mut acc: Vec<(PauliString, C64)> = Vec::new();
    let mut next: Vec<(PauliString, C64)> = Vec::new();
    for (ops, coeff) in op.terms() {
        if let Some(l) = ops.iter().find(|l| l.mode >= n_qubits) {
            return Err(JwError::IndexOutOfRange { index: l.mode, n_qubits });
        }
        acc.clear();
        acc.push((PauliString::identity(n_qubits), coeff));
        for &l in ops {
            next.clear();
            for (p, c) in &acc {
                for (q, w) in ladder_image(l, n_qubits) {
                    let (r, ph) = product_unchecked(p, &q);
                    next.push((r, times_i_pow(c * w, ph.0 as u32)));
                }
            }
            std::mem::swap(&mut acc, &mut next);
        }
        for (p, c) in acc.drain(..) {
            *out.terms.entry(p).or_default() += c;
        }
    }
    out.prune(PRUNE_TOL);
    Ok(out)
}
