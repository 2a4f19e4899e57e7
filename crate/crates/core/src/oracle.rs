//! Exact diagonalization in symmetry sectors, fidelities and crystal momentum.
//!
//! The Hamiltonian is projected onto the basis states of one sector (particle
//! number, optionally Sz and total momentum residue). Small sectors are solved
//! densely; larger ones with a block Davidson iteration.

use std::f64::consts::PI;

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

use crate::integrals::{KMesh, SpinOrbitalMap};
use crate::jw::{times_i_pow, PauliSum};
use crate::statevec::{inner_product, StateError, StateVector, MAX_STATE_QUBITS};
use crate::C64;

/// Sectors up to this dimension are diagonalized densely.
pub const DENSE_LIMIT: usize = 4096;
/// Residual norm required of iterative eigenpairs.
pub const RESIDUAL_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum OracleError {
    #[error("sector is empty")]
    SectorEmpty,
    #[error("requested {requested} states from a sector of dimension {dim}")]
    TooManyStates { requested: usize, dim: usize },
    #[error("{0} qubits exceeds the engine limit")]
    TooManyQubits(usize),
    #[error("iterative eigensolver stalled (residual {0:e})")]
    NotConverged(f64),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SectorSpec {
    pub n_particles: usize,
    /// `2·Sz = n_alpha − n_beta`.
    pub twice_sz: Option<i64>,
    pub momentum: Option<MomentumSector>,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct MomentumSector {
    pub residue: usize,
    pub layout: SpinOrbitalMap,
}

impl SectorSpec {
    pub fn particles(n_particles: usize) -> Self {
        SectorSpec { n_particles, twice_sz: None, momentum: None }
    }

    pub fn with_twice_sz(mut self, twice_sz: i64) -> Self {
        self.twice_sz = Some(twice_sz);
        self
    }

    pub fn with_momentum(mut self, residue: usize, layout: SpinOrbitalMap) -> Self {
        self.momentum = Some(MomentumSector { residue, layout });
        self
    }

    pub fn contains(&self, b: u64) -> bool {
        if b.count_ones() as usize != self.n_particles {
            return false;
        }
        if let Some(tsz) = self.twice_sz {
            let beta = (b & 0xAAAA_AAAA_AAAA_AAAA).count_ones() as i64;
            let alpha = b.count_ones() as i64 - beta;
            if alpha - beta != tsz {
                return false;
            }
        }
        if let Some(m) = &self.momentum {
            if momentum_residue(b, &m.layout) != m.residue {
                return false;
            }
        }
        true
    }
}

/// `Σ k_index` over occupied spin orbitals, mod n_k.
pub fn momentum_residue(b: u64, layout: &SpinOrbitalMap) -> usize {
    let mut total = 0;
    let mut rest = b;
    while rest != 0 {
        let q = rest.trailing_zeros() as usize;
        total += layout.decode(q).0;
        rest &= rest - 1;
    }
    total % layout.n_k()
}

/// Basis states of a sector, ascending.
#[derive(Clone, Debug)]
pub struct SectorBasis {
    n_qubits: usize,
    states: Vec<u64>,
    lookup: Vec<u32>,
}

impl SectorBasis {
    pub fn new(n_qubits: usize, spec: &SectorSpec) -> Result<Self, OracleError> {
        if n_qubits > MAX_STATE_QUBITS {
            return Err(OracleError::TooManyQubits(n_qubits));
        }
        let mut lookup = vec![u32::MAX; 1 << n_qubits];
        let mut states = Vec::new();
        for b in 0..1u64 << n_qubits {
            if spec.contains(b) {
                lookup[b as usize] = states.len() as u32;
                states.push(b);
            }
        }
        if states.is_empty() {
            return Err(OracleError::SectorEmpty);
        }
        Ok(SectorBasis { n_qubits, states, lookup })
    }

    pub fn dim(&self) -> usize {
        self.states.len()
    }

    pub fn states(&self) -> &[u64] {
        &self.states
    }

    pub fn index(&self, b: u64) -> Option<usize> {
        match self.lookup.get(b as usize) {
            Some(&i) if i != u32::MAX => Some(i as usize),
            _ => None,
        }
    }

    /// Embed sector coefficients into a full register state.
    pub fn embed(&self, coeffs: &[C64]) -> Result<StateVector, OracleError> {
        let mut amps = vec![C64::default(); 1 << self.n_qubits];
        for (&b, &c) in self.states.iter().zip(coeffs) {
            amps[b as usize] = c;
        }
        Ok(StateVector::from_amplitudes(self.n_qubits, amps)?)
    }
}

/// Sector-projected Hamiltonian, stored by column.
#[derive(Clone, Debug)]
pub struct SectorMatrix {
    dim: usize,
    col_ptr: Vec<usize>,
    rows: Vec<u32>,
    vals: Vec<C64>,
}

impl SectorMatrix {
    pub fn new(h: &PauliSum, basis: &SectorBasis) -> Self {
        // group strings by x-mask
        let mut groups: Vec<(u64, Vec<(u64, u32, C64)>)> = Vec::new();
        for (p, &c) in h.iter() {
            let entry = (p.z_mask(), p.y_count(), c);
            match groups.iter_mut().find(|(x, _)| *x == p.x_mask()) {
                Some((_, v)) => v.push(entry),
                None => groups.push((p.x_mask(), vec![entry])),
            }
        }
        let mut col_ptr = vec![0];
        let mut rows = Vec::new();
        let mut vals = Vec::new();
        for &b in &basis.states {
            for (x, terms) in &groups {
                let Some(row) = basis.index(b ^ x) else { continue };
                let mut v = C64::default();
                for &(z, ny, c) in terms {
                    v += times_i_pow(c, ny + 2 * ((b & z).count_ones() & 1));
                }
                if v.norm() > 0.0 {
                    rows.push(row as u32);
                    vals.push(v);
                }
            }
            col_ptr.push(rows.len());
        }
        SectorMatrix { dim: basis.dim(), col_ptr, rows, vals }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn nnz(&self) -> usize {
        self.vals.len()
    }

    pub fn apply(&self, v: &[C64], out: &mut [C64]) {
        out.iter_mut().for_each(|o| *o = C64::default());
        for col in 0..self.dim {
            let x = v[col];
            if x.re == 0.0 && x.im == 0.0 {
                continue;
            }
            for i in self.col_ptr[col]..self.col_ptr[col + 1] {
                out[self.rows[i] as usize] += self.vals[i] * x;
            }
        }
    }

    pub fn diagonal(&self) -> Vec<f64> {
        let mut d = vec![0.0; self.dim];
        for (col, slot) in d.iter_mut().enumerate() {
            for i in self.col_ptr[col]..self.col_ptr[col + 1] {
                if self.rows[i] as usize == col {
                    *slot += self.vals[i].re;
                }
            }
        }
        d
    }

    pub fn to_dense(&self) -> DMatrix<C64> {
        let mut m = DMatrix::zeros(self.dim, self.dim);
        for col in 0..self.dim {
            for i in self.col_ptr[col]..self.col_ptr[col + 1] {
                m[(self.rows[i] as usize, col)] += self.vals[i];
            }
        }
        m
    }

    pub fn residual(&self, value: f64, vector: &[C64]) -> f64 {
        let mut hv = vec![C64::default(); self.dim];
        self.apply(vector, &mut hv);
        hv.iter().zip(vector).map(|(a, b)| (a - value * b).norm_sqr()).sum::<f64>().sqrt()
    }
}

/// Lowest eigenpairs of a sector.
#[derive(Clone, Debug)]
pub struct SectorEigen {
    pub values: Vec<f64>,
    pub vectors: Vec<StateVector>,
    pub residuals: Vec<f64>,
    pub dim: usize,
}

/// Lowest `n_states` eigenpairs of `h` restricted to `spec`.
pub fn sector_eigenpairs(h: &PauliSum, spec: &SectorSpec, n_states: usize) -> Result<SectorEigen, OracleError> {
    let basis = SectorBasis::new(h.n_qubits(), spec)?;
    let m = SectorMatrix::new(h, &basis);
    if n_states > m.dim() {
        return Err(OracleError::TooManyStates { requested: n_states, dim: m.dim() });
    }
    let (values, coeffs) = if m.dim() <= DENSE_LIMIT { dense_lowest(&m, n_states) } else { davidson(&m, n_states)? };
    let residuals = values.iter().zip(&coeffs).map(|(&e, c)| m.residual(e, c)).collect();
    let vectors = coeffs.iter().map(|c| basis.embed(c)).collect::<Result<_, _>>()?;
    Ok(SectorEigen { values, vectors, residuals, dim: m.dim() })
}

pub fn sector_spectrum(h: &PauliSum, spec: &SectorSpec, n_states: usize) -> Result<Vec<f64>, OracleError> {
    Ok(sector_eigenpairs(h, spec, n_states)?.values)
}

pub fn fci_ground(h: &PauliSum, spec: &SectorSpec) -> Result<(f64, StateVector), OracleError> {
    let mut e = sector_eigenpairs(h, spec, 1)?;
    Ok((e.values[0], e.vectors.swap_remove(0)))
}

/// Ground energy plus every state within `tol` of it.
pub fn ground_manifold(h: &PauliSum, spec: &SectorSpec, tol: f64) -> Result<(f64, Vec<StateVector>), OracleError> {
    let mut n = 4;
    loop {
        let dim = SectorBasis::new(h.n_qubits(), spec)?.dim();
        let e = sector_eigenpairs(h, spec, n.min(dim))?;
        let count = e.values.iter().filter(|&&v| v - e.values[0] <= tol).count();
        if count < e.values.len() || n >= dim {
            return Ok((e.values[0], e.vectors.into_iter().take(count).collect()));
        }
        n *= 2;
    }
}

fn dense_lowest(m: &SectorMatrix, n_states: usize) -> (Vec<f64>, Vec<Vec<C64>>) {
    let eig = m.to_dense().symmetric_eigen();
    let mut order: Vec<usize> = (0..m.dim()).collect();
    order.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
    order
        .into_iter()
        .take(n_states)
        .map(|i| (eig.eigenvalues[i], eig.eigenvectors.column(i).iter().copied().collect()))
        .unzip()
}

fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x.conj() * y).sum()
}

fn vnorm(a: &[C64]) -> f64 {
    a.iter().map(|x| x.norm_sqr()).sum::<f64>().sqrt()
}

/// Orthogonalize `v` against `basis` twice, then normalize. `None` if it vanishes.
fn orthonormalize(mut v: Vec<C64>, basis: &[Vec<C64>]) -> Option<Vec<C64>> {
    let start = vnorm(&v);
    if start == 0.0 {
        return None;
    }
    for _ in 0..2 {
        for u in basis {
            let c = dot(u, &v);
            v.iter_mut().zip(u).for_each(|(a, b)| *a -= c * b);
        }
    }
    let n = vnorm(&v);
    if n <= 1e-10 * start {
        return None;
    }
    v.iter_mut().for_each(|a| *a /= n);
    Some(v)
}

/// Block Davidson with diagonal preconditioning.
fn davidson(m: &SectorMatrix, n_states: usize) -> Result<(Vec<f64>, Vec<Vec<C64>>), OracleError> {
    let dim = m.dim();
    let block = (n_states + 4).min(dim);
    let max_sub = (8 * block).max(48).min(dim);
    let diag = m.diagonal();
    let mut order: Vec<usize> = (0..dim).collect();
    order.sort_by(|&a, &b| diag[a].total_cmp(&diag[b]));

    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed);
    let mut v: Vec<Vec<C64>> = Vec::new();
    for &i in order.iter().take(block) {
        let mut g: Vec<C64> =
            (0..dim).map(|_| C64::new(rng.random_range(-1e-3..1e-3), rng.random_range(-1e-3..1e-3))).collect();
        g[i] += C64::new(1.0, 0.0);
        if let Some(u) = orthonormalize(g, &v) {
            v.push(u);
        }
    }
    let mut w: Vec<Vec<C64>> = v
        .iter()
        .map(|x| {
            let mut y = vec![C64::default(); dim];
            m.apply(x, &mut y);
            y
        })
        .collect();

    let mut worst = f64::INFINITY;
    for _ in 0..2000 {
        let k = v.len();
        let t = DMatrix::from_fn(k, k, |i, j| dot(&v[i], &w[j]));
        let t = (&t + t.adjoint()) * C64::new(0.5, 0.0);
        let eig = t.symmetric_eigen();
        let mut idx: Vec<usize> = (0..k).collect();
        idx.sort_by(|&a, &b| eig.eigenvalues[a].total_cmp(&eig.eigenvalues[b]));
        let ritz = |col: usize, src: &[Vec<C64>]| {
            let mut out = vec![C64::default(); dim];
            for (j, s) in src.iter().enumerate() {
                let c = eig.eigenvectors[(j, col)];
                out.iter_mut().zip(s).for_each(|(o, x)| *o += c * x);
            }
            out
        };
        let mut values = Vec::new();
        let mut vectors = Vec::new();
        let mut corrections = Vec::new();
        worst = 0.0;
        for &col in idx.iter().take(block.min(k)) {
            let theta = eig.eigenvalues[col];
            let x = ritz(col, &v);
            let hx = ritz(col, &w);
            let r: Vec<C64> = hx.iter().zip(&x).map(|(a, b)| a - theta * b).collect();
            let rn = vnorm(&r);
            if values.len() < n_states {
                worst = worst.max(rn);
            }
            if rn > RESIDUAL_TOL {
                let t: Vec<C64> = r
                    .iter()
                    .zip(&diag)
                    .map(|(ri, d)| {
                        let den = theta - d;
                        let den = if den.abs() < 1e-8 { 1e-8f64.copysign(den) } else { den };
                        ri / den
                    })
                    .collect();
                corrections.push(t);
            }
            values.push(theta);
            vectors.push(x);
        }
        if worst <= RESIDUAL_TOL {
            values.truncate(n_states);
            vectors.truncate(n_states);
            return Ok((values, vectors));
        }
        if v.len() + corrections.len() > max_sub {
            // restart from the current Ritz vectors
            let keep = (2 * block).min(k);
            let nv: Vec<Vec<C64>> = idx.iter().take(keep).map(|&c| ritz(c, &v)).collect();
            v = Vec::new();
            w = Vec::new();
            for x in nv {
                if let Some(u) = orthonormalize(x, &v) {
                    let mut y = vec![C64::default(); dim];
                    m.apply(&u, &mut y);
                    v.push(u);
                    w.push(y);
                }
            }
        }
        let mut added = 0;
        for t in corrections {
            if let Some(u) = orthonormalize(t, &v) {
                let mut y = vec![C64::default(); dim];
                m.apply(&u, &mut y);
                v.push(u);
                w.push(y);
                added += 1;
            }
        }
        if added == 0 {
            // fall back to a random direction to keep the space growing
            let g: Vec<C64> = (0..dim).map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))).collect();
            match orthonormalize(g, &v) {
                Some(u) => {
                    let mut y = vec![C64::default(); dim];
                    m.apply(&u, &mut y);
                    v.push(u);
                    w.push(y);
                }
                None => return Err(OracleError::NotConverged(worst)),
            }
        }
    }
    Err(OracleError::NotConverged(worst))
}

/// `|⟨a|b⟩|`.
pub fn fidelity(a: &StateVector, b: &StateVector) -> Result<f64, OracleError> {
    Ok(inner_product(a, b)?.norm())
}

/// Norm of the projection of `s` onto the span of orthonormal `basis`.
pub fn subspace_fidelity(s: &StateVector, basis: &[StateVector]) -> Result<f64, OracleError> {
    let mut total = 0.0;
    for v in basis {
        total += inner_product(v, s)?.norm_sqr();
    }
    Ok(total.sqrt())
}

/// Translation-operator diagnostics of a state.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CrystalMomentum {
    /// `⟨T_L⟩`.
    pub expectation: C64,
    /// `|⟨T_L⟩|`; 1 for a momentum eigenstate.
    pub magnitude: f64,
    /// Principal-branch crystal momentum, radians per Bohr.
    pub k: f64,
    /// `−i·ln⟨T_L⟩ / π`; the imaginary part measures the spread.
    pub kl_over_pi: C64,
}

/// `T_L` phase of one occupation bit string: `exp(i2π Σ_occ k_frac)`.
pub fn translation_phase(b: u64, mesh: &KMesh, layout: &SpinOrbitalMap) -> C64 {
    let mut frac = 0.0;
    let mut rest = b;
    while rest != 0 {
        let q = rest.trailing_zeros() as usize;
        frac += mesh.k_frac(layout.decode(q).0);
        rest &= rest - 1;
    }
    C64::from_polar(1.0, 2.0 * PI * frac.rem_euclid(1.0))
}

pub fn crystal_momentum(s: &StateVector, mesh: &KMesh, layout: &SpinOrbitalMap) -> CrystalMomentum {
    let mut t = C64::default();
    for (b, a) in s.amplitudes().iter().enumerate() {
        let w = a.norm_sqr();
        if w != 0.0 {
            t += w * translation_phase(b as u64, mesh, layout);
        }
    }
    let magnitude = t.norm();
    let log = t.ln();
    let kl_over_pi = C64::new(log.im, -log.re) / PI;
    CrystalMomentum { expectation: t, magnitude, k: t.arg() / mesh.cell_length(), kl_over_pi }
}
