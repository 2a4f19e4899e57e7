//! Quantum subspace expansion for charged excitations.
//!
//! IP pools hold `c` on occupied bands, EA pools hold `c†` on virtual bands,
//! one pool per (k, spin). Subspace matrices are built from exact operator
//! applications to the ground state and solved by canonical orthogonalization.

use std::fmt::Write as _;

use nalgebra::DMatrix;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::fermion::{FermionOperator, Ladder};
use crate::integrals::{CrystalIntegrals, IntegralError};
use crate::jw::{jordan_wigner, JwError, PauliSum};
use crate::statevec::{apply_operator, inner_product, StateError, StateVector};
use crate::C64;

pub const DEFAULT_METRIC_THRESHOLD: f64 = 1e-8;
pub const BANDS_SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Error)]
pub enum QseError {
    #[error("every metric eigenvalue fell below the threshold")]
    EmptySubspace,
    #[error("operator pool is empty")]
    EmptyPool,
    #[error("{0} electrons do not fill whole bands")]
    UnevenFilling(usize),
    #[error("k index {k} out of range for {n_k} k-points")]
    KOutOfRange { k: usize, n_k: usize },
    #[error("matrix shapes differ: {0}x{0} vs {1}x{1}")]
    ShapeMismatch(usize, usize),
    #[error(transparent)]
    Integrals(#[from] IntegralError),
    #[error(transparent)]
    Jw(#[from] JwError),
    #[error(transparent)]
    State(#[from] StateError),
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum PoolKind {
    Ip,
    Ea,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PoolOperator {
    pub k: usize,
    pub band: usize,
    pub spin: usize,
    pub mode: usize,
    pub op: PauliSum,
}

#[derive(Clone, Debug, PartialEq)]
pub struct SubspaceOperatorPool {
    pub kind: PoolKind,
    pub operators: Vec<PoolOperator>,
}

impl SubspaceOperatorPool {
    pub fn len(&self) -> usize {
        self.operators.len()
    }

    pub fn is_empty(&self) -> bool {
        self.operators.is_empty()
    }

    /// Pool for one k-point and spin.
    pub fn block(ints: &CrystalIntegrals, kind: PoolKind, k: usize, spin: usize) -> Result<Self, QseError> {
        if k >= ints.n_k() {
            return Err(QseError::KOutOfRange { k, n_k: ints.n_k() });
        }
        let n_occ = ints.occupied_per_k().ok_or(QseError::UnevenFilling(ints.n_elec()))?;
        let bands: Vec<usize> = match kind {
            PoolKind::Ip => (0..n_occ).collect(),
            PoolKind::Ea => (n_occ..ints.n_orb()).collect(),
        };
        let map = ints.spin_orbitals();
        let mut operators = Vec::new();
        for band in bands {
            let mode = map.qubit(k, band, spin);
            let ladder = match kind {
                PoolKind::Ip => Ladder::annihilate(mode),
                PoolKind::Ea => Ladder::create(mode),
            };
            let op = jordan_wigner(&FermionOperator::product(&[ladder], C64::new(1.0, 0.0)), ints.n_qubits())?;
            operators.push(PoolOperator { k, band, spin, mode, op });
        }
        Ok(SubspaceOperatorPool { kind, operators })
    }

    /// Every k-point and spin in one pool.
    pub fn full(ints: &CrystalIntegrals, kind: PoolKind) -> Result<Self, QseError> {
        let mut operators = Vec::new();
        for k in 0..ints.n_k() {
            for spin in 0..2 {
                operators.extend(Self::block(ints, kind, k, spin)?.operators);
            }
        }
        Ok(SubspaceOperatorPool { kind, operators })
    }
}

/// Distinct matrix elements needed for a pool of size `m` (upper triangles of H and S).
pub fn distinct_element_count(m: usize) -> usize {
    m * (m + 1)
}

/// `Hsub_ij = ⟨R_i ψ|H|R_j ψ⟩`, `Ssub_ij = ⟨R_i ψ|R_j ψ⟩`.
pub fn subspace_matrices(
    psi: &StateVector,
    h: &PauliSum,
    pool: &SubspaceOperatorPool,
) -> Result<(DMatrix<C64>, DMatrix<C64>), QseError> {
    if pool.is_empty() {
        return Err(QseError::EmptyPool);
    }
    let rpsi: Vec<StateVector> =
        pool.operators.iter().map(|o| apply_operator(psi, &o.op)).collect::<Result<_, _>>()?;
    let hrpsi: Vec<StateVector> = rpsi.iter().map(|r| apply_operator(r, h)).collect::<Result<_, _>>()?;
    let m = pool.len();
    let mut hs = DMatrix::zeros(m, m);
    let mut ss = DMatrix::zeros(m, m);
    for i in 0..m {
        for j in i..m {
            let hij = inner_product(&rpsi[i], &hrpsi[j])?;
            let sij = inner_product(&rpsi[i], &rpsi[j])?;
            hs[(i, j)] = hij;
            ss[(i, j)] = sij;
            if i != j {
                hs[(j, i)] = inner_product(&rpsi[j], &hrpsi[i])?;
                ss[(j, i)] = sij.conj();
            }
        }
    }
    Ok((hs, ss))
}

#[derive(Clone, Debug)]
pub struct GeneralizedSolution {
    pub values: Vec<f64>,
    /// Columns are eigenvectors in the original (non-orthogonal) basis.
    pub vectors: DMatrix<C64>,
    pub n_discarded: usize,
    /// Largest over smallest retained metric eigenvalue.
    pub metric_condition: f64,
}

/// Solve `H C = S C E` by canonical orthogonalization.
pub fn solve_generalized(
    h: &DMatrix<C64>,
    s: &DMatrix<C64>,
    metric_threshold: f64,
) -> Result<GeneralizedSolution, QseError> {
    if h.shape() != s.shape() || h.nrows() != h.ncols() {
        return Err(QseError::ShapeMismatch(h.nrows(), s.nrows()));
    }
    let half = C64::new(0.5, 0.0);
    let s_h = (s + s.adjoint()) * half;
    let h_h = (h + h.adjoint()) * half;
    let se = s_h.symmetric_eigen();
    let kept: Vec<usize> = (0..se.eigenvalues.len()).filter(|&i| se.eigenvalues[i] >= metric_threshold).collect();
    if kept.is_empty() {
        return Err(QseError::EmptySubspace);
    }
    let n = h.nrows();
    let x = DMatrix::from_fn(n, kept.len(), |r, c| {
        se.eigenvectors[(r, kept[c])] / se.eigenvalues[kept[c]].sqrt()
    });
    let hp = x.adjoint() * &h_h * &x;
    let hp = (&hp + hp.adjoint()) * half;
    let he = hp.symmetric_eigen();
    let mut order: Vec<usize> = (0..kept.len()).collect();
    order.sort_by(|&a, &b| he.eigenvalues[a].total_cmp(&he.eigenvalues[b]));
    let values = order.iter().map(|&i| he.eigenvalues[i]).collect();
    let y = DMatrix::from_fn(kept.len(), kept.len(), |r, c| he.eigenvectors[(r, order[c])]);
    let retained: Vec<f64> = kept.iter().map(|&i| se.eigenvalues[i]).collect();
    let max = retained.iter().cloned().fold(f64::MIN, f64::max);
    let min = retained.iter().cloned().fold(f64::MAX, f64::min);
    Ok(GeneralizedSolution {
        values,
        vectors: x * y,
        n_discarded: n - kept.len(),
        metric_condition: max / min,
    })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum BandKind {
    #[serde(rename = "v")]
    Valence,
    #[serde(rename = "c")]
    Conduction,
}

impl BandKind {
    pub fn tag(self) -> &'static str {
        match self {
            BandKind::Valence => "v",
            BandKind::Conduction => "c",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandPoint {
    pub k_index: usize,
    pub k_frac: f64,
    pub kind: BandKind,
    pub band_index: usize,
    pub energy: f64,
    pub aligned: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDiagnostics {
    pub k_index: usize,
    pub kind: PoolKind,
    pub spin: usize,
    pub pool_size: usize,
    pub metric_condition: f64,
    pub n_discarded: usize,
    /// Raw subspace eigenvalues with the sector constant applied.
    pub sector_energies: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BandStructure {
    pub e0: f64,
    pub points: Vec<BandPoint>,
    pub blocks: Vec<BlockDiagnostics>,
    /// Largest |alpha − beta| difference between matching block eigenvalues.
    pub spin_splitting: f64,
}

impl BandStructure {
    pub fn energies(&self, k: usize, kind: BandKind) -> Vec<f64> {
        self.points.iter().filter(|p| p.k_index == k && p.kind == kind).map(|p| p.energy).collect()
    }

    pub fn k_indices(&self) -> Vec<usize> {
        let mut ks: Vec<usize> = self.points.iter().map(|p| p.k_index).collect();
        ks.dedup();
        ks
    }

    /// Smallest direct gap and the k index where it occurs.
    pub fn direct_gap(&self) -> Option<(f64, usize)> {
        self.k_indices()
            .into_iter()
            .filter_map(|k| {
                let vmax = self.energies(k, BandKind::Valence).into_iter().reduce(f64::max)?;
                let cmin = self.energies(k, BandKind::Conduction).into_iter().reduce(f64::min)?;
                Some((cmin - vmax, k))
            })
            .min_by(|a, b| a.0.total_cmp(&b.0))
    }

    pub fn to_csv(&self) -> String {
        let mut out = String::from("k_index,k_frac,band_kind,band_index,energy_hartree,energy_aligned_hartree\n");
        for p in &self.points {
            let _ = writeln!(
                out,
                "{},{},{},{},{:.12},{:.12}",
                p.k_index,
                p.k_frac,
                p.kind.tag(),
                p.band_index,
                p.energy,
                p.aligned
            );
        }
        out
    }
}

/// Quasiparticle bands from the ground state `psi` with energy `e0`.
///
/// Valence: `ε = E0 − E(N−1)`; conduction: `ε = E(N+1) − E0`, with each
/// charged-sector energy carrying its own sector constant. Energies come from
/// the alpha-spin blocks; the beta blocks give `spin_splitting`.
pub fn bands(
    psi: &StateVector,
    e0: f64,
    h: &PauliSum,
    ints: &CrystalIntegrals,
    ks: &[usize],
    metric_threshold: f64,
) -> Result<BandStructure, QseError> {
    let n = ints.n_elec();
    let base = ints.sector_constant(n)?;
    let shift_ip = ints.sector_constant(n - 1)? - base;
    let shift_ea = ints.sector_constant(n + 1)? - base;
    let mut points = Vec::new();
    let mut blocks = Vec::new();
    let mut spin_splitting: f64 = 0.0;
    for &k in ks {
        for kind in [PoolKind::Ip, PoolKind::Ea] {
            let mut per_spin = Vec::new();
            for spin in 0..2 {
                let pool = SubspaceOperatorPool::block(ints, kind, k, spin)?;
                if pool.is_empty() {
                    per_spin.push(Vec::new());
                    continue;
                }
                let (hs, ss) = subspace_matrices(psi, h, &pool)?;
                let sol = solve_generalized(&hs, &ss, metric_threshold)?;
                let shift = if kind == PoolKind::Ip { shift_ip } else { shift_ea };
                let energies: Vec<f64> = sol.values.iter().map(|v| v + shift).collect();
                blocks.push(BlockDiagnostics {
                    k_index: k,
                    kind,
                    spin,
                    pool_size: pool.len(),
                    metric_condition: sol.metric_condition,
                    n_discarded: sol.n_discarded,
                    sector_energies: energies.clone(),
                });
                per_spin.push(energies);
            }
            for (a, b) in per_spin[0].iter().zip(&per_spin[1]) {
                spin_splitting = spin_splitting.max((a - b).abs());
            }
            let mut eps: Vec<f64> = match kind {
                PoolKind::Ip => per_spin[0].iter().map(|e| e0 - e).collect(),
                PoolKind::Ea => per_spin[0].iter().map(|e| e - e0).collect(),
            };
            eps.sort_by(f64::total_cmp);
            let band_kind = if kind == PoolKind::Ip { BandKind::Valence } else { BandKind::Conduction };
            for (band_index, energy) in eps.into_iter().enumerate() {
                points.push(BandPoint {
                    k_index: k,
                    k_frac: ints.mesh().k_frac(k),
                    kind: band_kind,
                    band_index,
                    energy,
                    aligned: energy,
                });
            }
        }
    }
    let top = points
        .iter()
        .filter(|p| p.kind == BandKind::Valence)
        .map(|p| p.energy)
        .fold(f64::NEG_INFINITY, f64::max);
    if top.is_finite() {
        points.iter_mut().for_each(|p| p.aligned = p.energy - top);
    }
    Ok(BandStructure { e0, points, blocks, spin_splitting })
}
