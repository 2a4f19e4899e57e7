//! k-resolved one- and two-body integrals (the KINT format).
//!
//! Two-body integrals are kept in chemist pair notation over spatial
//! crystalline orbitals, `v[(kp p),(kq q)|(kr r),(ks s)]`. Momentum
//! conservation is exact integer arithmetic on mesh indices:
//! `kp - kq + kr - ks = 0 (mod n_k)`.
//!
//! Files store one representative per symmetry orbit; the loader regenerates
//! the images under `v[pq|rs] = conj(v[qp|sr])` and `v[pq|rs] = v[rs|pq]`.

use std::collections::BTreeMap;
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::C64;

/// Relative tolerance for Hermiticity and symmetry validation.
pub const SYMMETRY_TOL: f64 = 1e-10;

#[derive(Debug, Error)]
pub enum IntegralError {
    #[error("cannot read {path}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed integral data: {0}")]
    Parse(String),
    #[error("two-body key {key} violates momentum conservation (residue {residue} mod {n_k})")]
    MomentumViolation { key: EriKey, residue: usize, n_k: usize },
    #[error("hermiticity violation in {what}: deviation {deviation:.3e}")]
    HermiticityViolation { what: String, deviation: f64 },
    #[error("electron count {requested} is not adjacent to the reference count {reference}")]
    SectorOutOfRange { requested: usize, reference: usize },
}

/// Uniform one-dimensional k-point mesh.
///
/// Point `i` sits at `(i + shift) / n_k` in units of `2π/L`.
#[derive(Clone, Debug, PartialEq)]
pub struct KMesh {
    n_k: usize,
    shift: f64,
    cell_length: f64,
}

impl KMesh {
    pub fn new(n_k: usize, shift: f64, cell_length: f64) -> Result<Self, IntegralError> {
        if n_k == 0 {
            return Err(IntegralError::Parse("n_k must be positive".into()));
        }
        if !(0.0..1.0).contains(&shift) {
            return Err(IntegralError::Parse(format!("mesh shift {shift} outside [0, 1)")));
        }
        if !(cell_length.is_finite() && cell_length > 0.0) {
            return Err(IntegralError::Parse(format!("invalid cell length {cell_length}")));
        }
        Ok(Self { n_k, shift, cell_length })
    }

    pub fn n_k(&self) -> usize {
        self.n_k
    }

    pub fn shift(&self) -> f64 {
        self.shift
    }

    /// Unit-cell length in Bohr.
    pub fn cell_length(&self) -> f64 {
        self.cell_length
    }

    /// Crystal momentum of point `index` as a fraction of `2π/L`.
    pub fn k_frac(&self, index: usize) -> f64 {
        (index as f64 + self.shift) / self.n_k as f64
    }

    /// Crystal momentum of point `index` in radians per Bohr.
    pub fn k_value(&self, index: usize) -> f64 {
        2.0 * std::f64::consts::PI * self.k_frac(index) / self.cell_length
    }

    /// Reduce a signed index combination modulo `n_k`.
    pub fn residue(&self, value: i64) -> usize {
        value.rem_euclid(self.n_k as i64) as usize
    }

    pub fn momentum_ok(&self, kp: usize, kq: usize, kr: usize, ks: usize) -> bool {
        self.residue(kp as i64 - kq as i64 + kr as i64 - ks as i64) == 0
    }
}

/// True iff `kp - kq + kr - ks` is a multiple of `n_k` (chemist pairing).
pub fn momentum_ok(kp: usize, kq: usize, kr: usize, ks: usize, mesh: &KMesh) -> bool {
    mesh.momentum_ok(kp, kq, kr, ks)
}

/// A spatial crystalline orbital `(k index, band index)`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct SpatialOrbital {
    pub k: usize,
    pub p: usize,
}

/// Key of a chemist-notation integral `[pq|rs]`.
#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct EriKey(pub [SpatialOrbital; 4]);

impl EriKey {
    pub fn new(kp: usize, p: usize, kq: usize, q: usize, kr: usize, r: usize, ks: usize, s: usize) -> Self {
        EriKey([
            SpatialOrbital { k: kp, p },
            SpatialOrbital { k: kq, p: q },
            SpatialOrbital { k: kr, p: r },
            SpatialOrbital { k: ks, p: s },
        ])
    }

    /// The four symmetry images with a flag marking complex conjugation.
    pub fn orbit(&self) -> [(EriKey, bool); 4] {
        let [a, b, c, d] = self.0;
        [
            (EriKey([a, b, c, d]), false),
            (EriKey([b, a, d, c]), true),
            (EriKey([c, d, a, b]), false),
            (EriKey([d, c, b, a]), true),
        ]
    }

    /// Smallest key of the symmetry orbit.
    pub fn canonical(&self) -> EriKey {
        self.orbit().iter().map(|(k, _)| *k).min().unwrap()
    }

    fn momentum_residue(&self, n_k: usize) -> usize {
        let [a, b, c, d] = self.0;
        (a.k as i64 - b.k as i64 + c.k as i64 - d.k as i64).rem_euclid(n_k as i64) as usize
    }
}

impl fmt::Display for EriKey {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let [a, b, c, d] = self.0;
        write!(f, "[({},{}) ({},{}) | ({},{}) ({},{})]", a.k, a.p, b.k, b.p, c.k, c.p, d.k, d.p)
    }
}

/// Spin-orbital to qubit layout: `q = k·(2·n_orb) + 2·p + spin`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct SpinOrbitalMap {
    n_orb: usize,
    n_k: usize,
}

/// Spin label: 0 for alpha, 1 for beta.
pub type Spin = usize;

impl SpinOrbitalMap {
    pub fn new(n_orb: usize, n_k: usize) -> Self {
        Self { n_orb, n_k }
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    pub fn n_k(&self) -> usize {
        self.n_k
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_orb * self.n_k
    }

    pub fn qubit(&self, k: usize, p: usize, spin: Spin) -> usize {
        debug_assert!(k < self.n_k && p < self.n_orb && spin < 2);
        k * 2 * self.n_orb + 2 * p + spin
    }

    /// Inverse of [`SpinOrbitalMap::qubit`]: `(k, p, spin)`.
    pub fn decode(&self, qubit: usize) -> (usize, usize, Spin) {
        let block = 2 * self.n_orb;
        (qubit / block, (qubit % block) / 2, qubit % 2)
    }
}

/// Validated k-resolved integrals. Immutable after construction.
#[derive(Clone, Debug)]
pub struct CrystalIntegrals {
    mesh: KMesh,
    n_orb: usize,
    n_elec: usize,
    one_body: Vec<Vec<C64>>,
    two_body: BTreeMap<EriKey, C64>,
    e_const: f64,
    madelung: f64,
    references: BTreeMap<String, f64>,
    provenance: Option<serde_json::Value>,
}

/// Scalar metadata that accompanies the integral tensors.
#[derive(Clone, Debug, PartialEq)]
pub struct IntegralHeader {
    pub mesh: KMesh,
    pub n_orb: usize,
    pub n_elec: usize,
    pub e_const: f64,
    pub madelung: f64,
}

impl CrystalIntegrals {
    /// Validate and assemble integrals.
    ///
    /// `one_body[k]` is a row-major `n_orb × n_orb` matrix. `two_body` may
    /// contain any subset of each symmetry orbit; missing images are
    /// regenerated and provided images must agree to [`SYMMETRY_TOL`].
    pub fn new(
        header: IntegralHeader,
        one_body: Vec<Vec<C64>>,
        two_body: impl IntoIterator<Item = (EriKey, C64)>,
        references: BTreeMap<String, f64>,
    ) -> Result<Self, IntegralError> {
        let IntegralHeader { mesh, n_orb, n_elec, e_const, madelung } = header;
        let n_k = mesh.n_k();
        if n_orb == 0 {
            return Err(IntegralError::Parse("n_orb must be positive".into()));
        }
        if n_elec > 2 * n_orb * n_k {
            return Err(IntegralError::Parse(format!(
                "{n_elec} electrons exceed {} spin orbitals",
                2 * n_orb * n_k
            )));
        }
        if !e_const.is_finite() || !madelung.is_finite() {
            return Err(IntegralError::Parse("non-finite constants".into()));
        }
        if one_body.len() != n_k {
            return Err(IntegralError::Parse(format!("expected {n_k} one-body blocks, got {}", one_body.len())));
        }
        for (k, block) in one_body.iter().enumerate() {
            if block.len() != n_orb * n_orb {
                return Err(IntegralError::Parse(format!("one-body block {k} has wrong size")));
            }
            let scale = block.iter().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);
            for p in 0..n_orb {
                for q in 0..n_orb {
                    let dev = (block[p * n_orb + q] - block[q * n_orb + p].conj()).norm();
                    if !(dev <= SYMMETRY_TOL * scale) {
                        return Err(IntegralError::HermiticityViolation {
                            what: format!("t[{k}][{p}][{q}]"),
                            deviation: dev / scale,
                        });
                    }
                }
            }
        }

        let mut provided: BTreeMap<EriKey, C64> = BTreeMap::new();
        for (key, value) in two_body {
            for orb in key.0 {
                if orb.k >= n_k || orb.p >= n_orb {
                    return Err(IntegralError::Parse(format!("two-body key {key} out of range")));
                }
            }
            if !(value.re.is_finite() && value.im.is_finite()) {
                return Err(IntegralError::Parse(format!("non-finite value at {key}")));
            }
            let residue = key.momentum_residue(n_k);
            if residue != 0 {
                return Err(IntegralError::MomentumViolation { key, residue, n_k });
            }
            if let Some(prev) = provided.insert(key, value) {
                if prev != value {
                    return Err(IntegralError::Parse(format!("duplicate record {key}")));
                }
            }
        }
        let scale = provided.values().map(|z| z.norm()).fold(0.0, f64::max).max(f64::MIN_POSITIVE);

        let mut expanded = BTreeMap::new();
        let mut seen = std::collections::BTreeSet::new();
        for (&key, &value) in &provided {
            let canonical = key.canonical();
            if !seen.insert(canonical) {
                continue;
            }
            // the first provided member of the orbit (in key order) seeds every image
            let orbit = key.orbit();
            for &(image, conj) in &orbit {
                let implied = if conj { value.conj() } else { value };
                if let Some(&given) = provided.get(&image) {
                    let dev = (given - implied).norm();
                    if !(dev <= SYMMETRY_TOL * scale) {
                        return Err(IntegralError::HermiticityViolation {
                            what: format!("v{image} against v{key}"),
                            deviation: dev / scale,
                        });
                    }
                }
            }
            let seed_conj = orbit.iter().find(|(k, _)| *k == canonical).map(|(_, c)| *c).unwrap();
            let canon_value = if seed_conj { value.conj() } else { value };
            if canon_value != C64::new(0.0, 0.0) {
                // self-paired images keep the canonical value
                for (image, conj) in canonical.orbit() {
                    expanded.entry(image).or_insert(if conj { canon_value.conj() } else { canon_value });
                }
            }
        }

        Ok(Self {
            mesh,
            n_orb,
            n_elec,
            one_body,
            two_body: expanded,
            e_const,
            madelung,
            references,
            provenance: None,
        })
    }

    pub fn mesh(&self) -> &KMesh {
        &self.mesh
    }

    pub fn n_orb(&self) -> usize {
        self.n_orb
    }

    pub fn n_k(&self) -> usize {
        self.mesh.n_k()
    }

    /// Electrons in the reference sector (whole `n_k`-cell supercell).
    pub fn n_elec(&self) -> usize {
        self.n_elec
    }

    pub fn n_qubits(&self) -> usize {
        2 * self.n_orb * self.mesh.n_k()
    }

    pub fn spin_orbitals(&self) -> SpinOrbitalMap {
        SpinOrbitalMap::new(self.n_orb, self.mesh.n_k())
    }

    /// One-body integral `t[k][p][q]` in Hartree.
    pub fn t(&self, k: usize, p: usize, q: usize) -> C64 {
        self.one_body[k][p * self.n_orb + q]
    }

    /// Two-body integral, zero for absent keys.
    pub fn v(&self, key: &EriKey) -> C64 {
        self.two_body.get(key).copied().unwrap_or_default()
    }

    /// All nonzero two-body integrals including symmetry images.
    pub fn two_body(&self) -> impl Iterator<Item = (&EriKey, &C64)> {
        self.two_body.iter()
    }

    pub fn e_const(&self) -> f64 {
        self.e_const
    }

    pub fn madelung(&self) -> f64 {
        self.madelung
    }

    pub fn references(&self) -> &BTreeMap<String, f64> {
        &self.references
    }

    pub fn reference(&self, label: &str) -> Option<f64> {
        self.references.get(label).copied()
    }

    pub fn header(&self) -> IntegralHeader {
        IntegralHeader {
            mesh: self.mesh.clone(),
            n_orb: self.n_orb,
            n_elec: self.n_elec,
            e_const: self.e_const,
            madelung: self.madelung,
        }
    }

    /// Occupied bands per k-point of the restricted reference, if the
    /// electrons fill every k-point equally.
    pub fn occupied_per_k(&self) -> Option<usize> {
        let per = 2 * self.mesh.n_k();
        self.n_elec.is_multiple_of(per).then_some(self.n_elec / per)
    }

    /// Constant energy of the sector holding `n_sector` electrons.
    ///
    /// The reference sector gets `e_const`. Removing an electron adds
    /// `madelung`, adding one leaves the constant unchanged:
    /// `e_const + madelung·d·(d-1)/2` with `d = n_sector - n_elec`.
    pub fn sector_constant(&self, n_sector: usize) -> Result<f64, IntegralError> {
        let d = n_sector as i64 - self.n_elec as i64;
        if d.abs() > 1 {
            return Err(IntegralError::SectorOutOfRange { requested: n_sector, reference: self.n_elec });
        }
        Ok(self.e_const + self.madelung * (d * (d - 1) / 2) as f64)
    }

    /// Parse KINT JSON text.
    pub fn from_json_str(text: &str) -> Result<Self, IntegralError> {
        let file: KintFile = serde_json::from_str(text).map_err(|e| IntegralError::Parse(e.to_string()))?;
        let meta = file.meta;
        let mesh = KMesh::new(meta.n_k, meta.shift, meta.l_bohr)?;
        let mut one_body = Vec::with_capacity(file.t.len());
        for (k, rows) in file.t.into_iter().enumerate() {
            if rows.len() != meta.n_orb {
                return Err(IntegralError::Parse(format!("t[{k}] has {} rows", rows.len())));
            }
            let mut block = Vec::with_capacity(meta.n_orb * meta.n_orb);
            for (p, row) in rows.into_iter().enumerate() {
                if row.len() != meta.n_orb {
                    return Err(IntegralError::Parse(format!("t[{k}][{p}] has {} columns", row.len())));
                }
                block.extend(row.into_iter().map(|[re, im]| C64::new(re, im)));
            }
            one_body.push(block);
        }
        let records = file
            .v
            .into_iter()
            .map(|r| (EriKey::new(r.kp, r.p, r.kq, r.q, r.kr, r.r, r.ks, r.s), C64::new(r.re, r.im)));
        let header = IntegralHeader {
            mesh,
            n_orb: meta.n_orb,
            n_elec: meta.n_elec,
            e_const: meta.e_const,
            madelung: meta.madelung,
        };
        let mut ints = Self::new(header, one_body, records, file.refs)?;
        ints.provenance = file.refs_meta;
        Ok(ints)
    }

    /// Serialize to KINT JSON, one record per symmetry orbit.
    pub fn to_json_string(&self) -> String {
        let n = self.n_orb;
        let t = self
            .one_body
            .iter()
            .map(|block| (0..n).map(|p| (0..n).map(|q| [block[p * n + q].re, block[p * n + q].im]).collect()).collect())
            .collect();
        let v = self
            .two_body
            .iter()
            .filter(|(key, _)| key.canonical() == **key)
            .map(|(key, value)| {
                let [a, b, c, d] = key.0;
                KintRecord { kp: a.k, p: a.p, kq: b.k, q: b.p, kr: c.k, r: c.p, ks: d.k, s: d.p, re: value.re, im: value.im }
            })
            .collect();
        let file = KintFile {
            meta: KintMeta {
                n_orb: self.n_orb,
                n_k: self.mesh.n_k(),
                shift: self.mesh.shift(),
                n_elec: self.n_elec,
                l_bohr: self.mesh.cell_length(),
                e_const: self.e_const,
                madelung: self.madelung,
            },
            t,
            v,
            refs: self.references.clone(),
            refs_meta: self.provenance.clone(),
        };
        serde_json::to_string_pretty(&file).expect("integral serialization")
    }
}

/// Load and validate a KINT file.
pub fn load(path: impl AsRef<Path>) -> Result<CrystalIntegrals, IntegralError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path)
        .map_err(|source| IntegralError::Io { path: path.display().to_string(), source })?;
    CrystalIntegrals::from_json_str(&text)
}

/// Write integrals as KINT JSON.
pub fn write(ints: &CrystalIntegrals, path: impl AsRef<Path>) -> Result<(), IntegralError> {
    let path = path.as_ref();
    std::fs::write(path, ints.to_json_string())
        .map_err(|source| IntegralError::Io { path: path.display().to_string(), source })
}

#[derive(Serialize, Deserialize)]
struct KintFile {
    meta: KintMeta,
    t: Vec<Vec<Vec<[f64; 2]>>>,
    v: Vec<KintRecord>,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    refs: BTreeMap<String, f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    refs_meta: Option<serde_json::Value>,
}

#[derive(Serialize, Deserialize)]
struct KintMeta {
    n_orb: usize,
    n_k: usize,
    #[serde(default)]
    shift: f64,
    n_elec: usize,
    #[serde(rename = "L_bohr")]
    l_bohr: f64,
    e_const: f64,
    #[serde(default)]
    madelung: f64,
}

#[derive(Serialize, Deserialize)]
struct KintRecord {
    kp: usize,
    p: usize,
    kq: usize,
    q: usize,
    kr: usize,
    r: usize,
    ks: usize,
    s: usize,
    re: f64,
    im: f64,
}

#[cfg(test)]
mod tests {
    use super::*;

    fn toy_header(n_k: usize, n_orb: usize, n_elec: usize) -> IntegralHeader {
        IntegralHeader { mesh: KMesh::new(n_k, 0.0, 2.0).unwrap(), n_orb, n_elec, e_const: 0.5, madelung: 0.0 }
    }

    fn minimal_json(extra_v: &str) -> String {
        format!(
            r#"{{"meta": {{"n_orb": 1, "n_k": 3, "shift": 0.0, "n_elec": 2, "L_bohr": 2.0, "e_const": 0.1, "madelung": 0.0}},
                "t": [[[[-1.0, 0.0]]], [[[-0.5, 0.0]]], [[[-0.5, 0.0]]]],
                "v": [{extra_v}]}}"#
        )
    }

    #[test]
    fn momentum_examples() {
        let m3 = KMesh::new(3, 0.0, 1.0).unwrap();
        let m2 = KMesh::new(2, 0.0, 1.0).unwrap();
        assert!(momentum_ok(0, 0, 0, 0, &m3));
        assert!(momentum_ok(2, 1, 1, 2, &m3));
        assert!(!momentum_ok(1, 0, 0, 0, &m2));
    }

    #[test]
    fn minimal_file_has_two_qubits() {
        let json = r#"{"meta": {"n_orb": 1, "n_k": 1, "shift": 0.0, "n_elec": 2, "L_bohr": 1.0, "e_const": 0.0, "madelung": 0.0},
                       "t": [[[[-1.0, 0.0]]]], "v": []}"#;
        let ints = CrystalIntegrals::from_json_str(json).unwrap();
        assert_eq!(ints.n_qubits(), 2);
        assert!(ints.references().is_empty());
    }

    #[test]
    fn momentum_violation_is_rejected() {
        let bad = r#"{"kp":1,"p":0,"kq":2,"q":0,"kr":0,"r":0,"ks":0,"s":0,"re":0.1,"im":0.0}"#;
        match CrystalIntegrals::from_json_str(&minimal_json(bad)) {
            Err(IntegralError::MomentumViolation { residue, n_k, .. }) => {
                assert_eq!(n_k, 3);
                assert_eq!(residue, 2);
            }
            other => panic!("expected momentum violation, got {other:?}"),
        }
    }

    #[test]
    fn non_hermitian_one_body_is_rejected() {
        let t = vec![vec![C64::new(1.0, 0.0), C64::new(0.2, 0.1), C64::new(0.2, 0.1), C64::new(2.0, 0.0)]];
        let err = CrystalIntegrals::new(toy_header(1, 2, 2), t, [], BTreeMap::new()).unwrap_err();
        assert!(matches!(err, IntegralError::HermiticityViolation { .. }));
    }

    #[test]
    fn inconsistent_images_are_rejected() {
        let t = vec![vec![C64::new(-1.0, 0.0), C64::default(), C64::default(), C64::new(1.0, 0.0)]];
        let key = EriKey::new(0, 0, 0, 1, 0, 1, 0, 1);
        let conj = EriKey::new(0, 1, 0, 0, 0, 1, 0, 1);
        let v = [(key, C64::new(0.1, 0.02)), (conj, C64::new(0.1, 0.02))];
        let err = CrystalIntegrals::new(toy_header(1, 2, 2), t, v, BTreeMap::new()).unwrap_err();
        assert!(matches!(err, IntegralError::HermiticityViolation { .. }));
    }

    #[test]
    fn images_are_regenerated() {
        let t = vec![vec![C64::new(-1.0, 0.0), C64::default(), C64::default(), C64::new(1.0, 0.0)]];
        let key = EriKey::new(0, 0, 0, 1, 0, 1, 0, 1);
        let value = C64::new(0.1, 0.02);
        let ints = CrystalIntegrals::new(toy_header(1, 2, 2), t, [(key, value)], BTreeMap::new()).unwrap();
        for (image, conj) in key.orbit() {
            let expected = if conj { value.conj() } else { value };
            assert_eq!(ints.v(&image), expected);
        }
    }

    #[test]
    fn sector_constants() {
        let t = vec![vec![C64::new(-1.0, 0.0)]];
        let mut h = toy_header(1, 1, 1);
        h.madelung = 0.25;
        let ints = CrystalIntegrals::new(h.clone(), t.clone(), [], BTreeMap::new()).unwrap();
        assert_eq!(ints.sector_constant(1).unwrap(), 0.5);
        assert_eq!(ints.sector_constant(0).unwrap(), 0.75);
        assert_eq!(ints.sector_constant(2).unwrap(), 0.5);
        assert!(matches!(ints.sector_constant(3), Err(IntegralError::SectorOutOfRange { .. })));
        h.madelung = 0.0;
        let flat = CrystalIntegrals::new(h, t, [], BTreeMap::new()).unwrap();
        assert_eq!(flat.sector_constant(0).unwrap(), flat.e_const());
    }

    #[test]
    fn spin_orbital_map_is_bijective() {
        let map = SpinOrbitalMap::new(2, 3);
        assert_eq!(map.n_qubits(), 12);
        let mut seen = [false; 12];
        for k in 0..3 {
            for p in 0..2 {
                for s in 0..2 {
                    let q = map.qubit(k, p, s);
                    assert!(!seen[q]);
                    seen[q] = true;
                    assert_eq!(map.decode(q), (k, p, s));
                }
            }
        }
    }

    #[test]
    fn malformed_json_is_a_parse_error() {
        assert!(matches!(CrystalIntegrals::from_json_str("{"), Err(IntegralError::Parse(_))));
        let bad_shift = minimal_json("").replace("\"shift\": 0.0", "\"shift\": 1.5");
        assert!(matches!(CrystalIntegrals::from_json_str(&bad_shift), Err(IntegralError::Parse(_))));
    }
}
