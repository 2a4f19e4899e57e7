//! Shipped reference integral files and their manifest.
//!
//! `refdata/manifest.json` lists every file with its SHA-256, a description
//! and expected values (with tolerances) that the test suites consume.

use std::collections::BTreeMap;
use std::fmt;
use std::fs;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::integrals::{self, CrystalIntegrals};

pub const MANIFEST_NAME: &str = "manifest.json";

#[derive(Debug, Error)]
pub enum ManifestError {
    #[error("cannot access {path}")]
    Io { path: PathBuf, source: std::io::Error },
    #[error("manifest is not valid JSON")]
    Parse(#[from] serde_json::Error),
    #[error("no manifest entry for {0}")]
    UnknownFile(String),
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Expected {
    pub value: f64,
    pub tol: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    /// Path relative to the refdata root.
    pub path: String,
    pub sha256: String,
    pub description: String,
    #[serde(default)]
    pub expected: BTreeMap<String, Expected>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub schema_version: u32,
    pub files: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn load(root: &Path) -> Result<Self, ManifestError> {
        let path = root.join(MANIFEST_NAME);
        let text = fs::read_to_string(&path).map_err(|source| ManifestError::Io { path, source })?;
        Ok(serde_json::from_str(&text)?)
    }

    pub fn entry(&self, path: &str) -> Result<&ManifestEntry, ManifestError> {
        self.files.iter().find(|e| e.path == path).ok_or_else(|| ManifestError::UnknownFile(path.to_string()))
    }

    pub fn to_json_string(&self) -> String {
        serde_json::to_string_pretty(self).expect("manifest serializes") + "\n"
    }
}

/// Root of the shipped `refdata/` directory in a source checkout.
pub fn default_root() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../refdata")
}

pub fn sha256_file(path: &Path) -> Result<String, ManifestError> {
    let bytes = fs::read(path).map_err(|source| ManifestError::Io { path: path.to_path_buf(), source })?;
    Ok(hex::encode(Sha256::digest(&bytes)))
}

#[derive(Clone, Debug, PartialEq)]
pub enum Issue {
    Missing,
    Checksum { expected: String, actual: String },
    Load(String),
    Reference { label: String, expected: f64, actual: Option<f64> },
}

impl fmt::Display for Issue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Issue::Missing => write!(f, "file missing"),
            Issue::Checksum { expected, actual } => write!(f, "checksum mismatch: expected {expected}, got {actual}"),
            Issue::Load(e) => write!(f, "does not load: {e}"),
            Issue::Reference { label, expected, actual } => {
                write!(f, "reference {label}: manifest {expected}, file {actual:?}")
            }
        }
    }
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct ManifestReport {
    pub checked: Vec<String>,
    pub failures: Vec<(String, Issue)>,
}

impl ManifestReport {
    pub fn ok(&self) -> bool {
        self.failures.is_empty()
    }
}

impl fmt::Display for ManifestReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        for path in &self.checked {
            let issues: Vec<_> = self.failures.iter().filter(|(p, _)| p == path).collect();
            if issues.is_empty() {
                writeln!(f, "ok    {path}")?;
            }
            for (_, issue) in issues {
                writeln!(f, "FAIL  {path}: {issue}")?;
            }
        }
        Ok(())
    }
}

/// Check checksums, loadability and that expected values mirror the file's references.
pub fn verify_manifest(root: &Path) -> Result<ManifestReport, ManifestError> {
    let manifest = Manifest::load(root)?;
    let mut report = ManifestReport::default();
    for entry in &manifest.files {
        report.checked.push(entry.path.clone());
        let path = root.join(&entry.path);
        if !path.is_file() {
            report.failures.push((entry.path.clone(), Issue::Missing));
            continue;
        }
        let actual = sha256_file(&path)?;
        if actual != entry.sha256 {
            report.failures.push((entry.path.clone(), Issue::Checksum { expected: entry.sha256.clone(), actual }));
            continue;
        }
        match integrals::load(&path) {
            Ok(ints) => check_references(entry, &ints, &mut report),
            Err(e) => report.failures.push((entry.path.clone(), Issue::Load(e.to_string()))),
        }
    }
    Ok(report)
}

fn check_references(entry: &ManifestEntry, ints: &CrystalIntegrals, report: &mut ManifestReport) {
    for (label, exp) in &entry.expected {
        let actual = ints.reference(label);
        let good = actual.is_some_and(|a| (a - exp.value).abs() <= exp.tol);
        if !good {
            report.failures.push((
                entry.path.clone(),
                Issue::Reference { label: label.clone(), expected: exp.value, actual },
            ));
        }
    }
}
