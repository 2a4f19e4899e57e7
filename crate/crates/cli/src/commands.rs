use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Mutex;

use anyhow::{bail, Context, Result};
use kvqe::integrals::{self, CrystalIntegrals};
use kvqe::oracle::{crystal_momentum, ground_manifold, subspace_fidelity, SectorSpec};
use kvqe::qse::{self, BandKind, BandStructure};
use kvqe::refdata::verify_manifest;
use kvqe::statevec::expectation;
use kvqe::vqe::{perturbed_start, VqeProblem, VqeResult};
use kvqe::{AnsatzVariant, PauliSum, StateVector};
use serde::{Deserialize, Serialize};

use crate::config::{Settings, Task};
use crate::svg::{self, Series};
use crate::Common;

pub const SCHEMA_VERSION: u32 = 1;
pub const PEC_HEADER: &str = "geometry_label,e_hf,e_vqe,e_fci,error_vs_fci,status";
const DEGENERACY_TOL: f64 = 1e-8;

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct VqeReport {
    pub file: PathBuf,
    pub variant: AnsatzVariant,
    pub momentum_filter: bool,
    pub n_qubits: usize,
    pub n_params: usize,
    pub e_hf: f64,
    #[serde(flatten)]
    pub result: VqeResult,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub fci_energy: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error_vs_fci: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_over_pi_re: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub kl_over_pi_im: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub infidelity: Option<f64>,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GapSummary {
    pub schema_version: u32,
    pub direct_gap_hartree: f64,
    pub k_of_gap: f64,
    pub k_index_of_gap: usize,
    pub e0: f64,
    pub vqe_converged: bool,
    pub spin_splitting: f64,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct DiagReport {
    pub schema_version: u32,
    pub source: String,
    pub energy: f64,
    pub fci_energy: f64,
    #[serde(rename = "KL_over_pi_re")]
    pub kl_over_pi_re: f64,
    #[serde(rename = "KL_over_pi_im")]
    pub kl_over_pi_im: f64,
    pub translation_magnitude: f64,
    pub infidelity: f64,
}

pub enum DiagSource {
    Inline,
    HartreeFock,
    Result(PathBuf),
}

struct Run {
    ints: CrystalIntegrals,
    problem: VqeProblem,
    state: StateVector,
    report: VqeReport,
}

fn load(path: &Path) -> Result<CrystalIntegrals> {
    integrals::load(path).with_context(|| format!("loading {}", path.display()))
}

fn problem(ints: &CrystalIntegrals, variant: AnsatzVariant, filter: bool, s: &Settings) -> Result<VqeProblem> {
    let mut p = VqeProblem::for_integrals(ints, variant, filter)?;
    p.settings = s.bfgs;
    Ok(p)
}

fn run_vqe(path: &Path, s: &Settings) -> Result<Run> {
    let ints = load(path)?;
    let problem = problem(&ints, s.variant, s.momentum_filter, s)?;
    let e_hf = expectation(problem.reference(), problem.hamiltonian())?.re;
    let x0 = match s.seed {
        Some(seed) => perturbed_start(problem.n_params(), s.init_scale, seed),
        None => vec![0.0; problem.n_params()],
    };
    let result = problem.minimize(&x0)?;
    let state = problem.state(&result.params)?;
    let report = VqeReport {
        file: path.to_path_buf(),
        variant: s.variant,
        momentum_filter: s.momentum_filter,
        n_qubits: ints.n_qubits(),
        n_params: problem.n_params(),
        e_hf,
        result,
        fci_energy: None,
        error_vs_fci: None,
        kl_over_pi_re: None,
        kl_over_pi_im: None,
        infidelity: None,
    };
    Ok(Run { ints, problem, state, report })
}

fn fci(h: &PauliSum, ints: &CrystalIntegrals) -> Result<(f64, Vec<StateVector>)> {
    Ok(ground_manifold(h, &SectorSpec::particles(ints.n_elec()), DEGENERACY_TOL)?)
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> Result<()> {
    let text = serde_json::to_string_pretty(value)? + "\n";
    fs::write(path, text).with_context(|| format!("writing {}", path.display()))
}

fn out_dir(s: &Settings) -> Result<&Path> {
    fs::create_dir_all(&s.out).with_context(|| format!("creating {}", s.out.display()))?;
    Ok(&s.out)
}

fn exit_for(converged: bool) -> ExitCode {
    if converged {
        ExitCode::SUCCESS
    } else {
        ExitCode::from(2)
    }
}

pub fn vqe(common: &Common, files: &[PathBuf]) -> Result<ExitCode> {
    let s = Settings::resolve(common, files)?;
    let path = s.single_file()?.to_path_buf();
    let out = out_dir(&s)?.to_path_buf();
    let mut run = run_vqe(&path, &s)?;
    if s.has(Task::Fci) || s.has(Task::Fidelity) {
        let (e, ground) = fci(run.problem.hamiltonian(), &run.ints)?;
        run.report.fci_energy = Some(e);
        run.report.error_vs_fci = Some(run.report.result.energy - e);
        if s.has(Task::Fidelity) {
            run.report.infidelity = Some(1.0 - subspace_fidelity(&run.state, &ground)?);
        }
    }
    if s.has(Task::Momentum) {
        let cm = crystal_momentum(&run.state, run.ints.mesh(), &run.ints.spin_orbitals());
        run.report.kl_over_pi_re = Some(cm.kl_over_pi.re);
        run.report.kl_over_pi_im = Some(cm.kl_over_pi.im);
    }
    write_json(&out.join("vqe_result.json"), &run.report)?;
    if s.has(Task::Bands) {
        write_bands(&run, &s, &out)?;
    }
    let r = &run.report.result;
    eprintln!("energy {:.10} Ha after {} iterations ({:?})", r.energy, r.iterations, r.termination);
    Ok(exit_for(r.converged))
}

pub fn geometry_label(path: &Path) -> String {
    let name = path.file_name().map(|n| n.to_string_lossy().into_owned()).unwrap_or_default();
    name.strip_suffix(".kint.json")
        .or_else(|| name.strip_suffix(".json"))
        .unwrap_or(&name)
        .to_string()
}

fn label_value(label: &str) -> Option<f64> {
    let start = label.find(|c: char| c.is_ascii_digit())?;
    label[start..].parse().ok()
}

struct PecRow {
    label: String,
    e_hf: f64,
    e_vqe: f64,
    e_fci: f64,
    status: String,
}

fn pec_point(path: &Path, s: &Settings, points_dir: &Path) -> Result<(PecRow, bool)> {
    let mut run = run_vqe(path, s)?;
    let (e_fci, _) = fci(run.problem.hamiltonian(), &run.ints)?;
    run.report.fci_energy = Some(e_fci);
    run.report.error_vs_fci = Some(run.report.result.energy - e_fci);
    let label = geometry_label(path);
    write_json(&points_dir.join(format!("{label}.json")), &run.report)?;
    let converged = run.report.result.converged;
    let row = PecRow {
        label,
        e_hf: run.report.e_hf,
        e_vqe: run.report.result.energy,
        e_fci,
        status: if converged { "ok".into() } else { serde_json::to_value(run.report.result.termination)?.as_str().unwrap_or("unknown").to_string() },
    };
    Ok((row, converged))
}

pub fn pec_csv(rows: &[(String, f64, f64, f64, String)]) -> String {
    let mut out = format!("{PEC_HEADER}\n");
    for (label, hf, vqe, fci, status) in rows {
        out += &format!("{label},{hf:.12},{vqe:.12},{fci:.12},{:.12},{status}\n", vqe - fci);
    }
    out
}

pub fn pec(common: &Common, files: &[PathBuf]) -> Result<ExitCode> {
    let s = Settings::resolve(common, files)?;
    if s.files.len() < 2 {
        bail!("pec needs at least two integral files, got {}", s.files.len());
    }
    let out = out_dir(&s)?.to_path_buf();
    let points_dir = out.join("points");
    fs::create_dir_all(&points_dir)?;

    let next = AtomicUsize::new(0);
    let slots: Mutex<Vec<Option<Result<(PecRow, bool)>>>> = Mutex::new((0..s.files.len()).map(|_| None).collect());
    std::thread::scope(|scope| {
        for _ in 0..s.jobs.min(s.files.len()) {
            scope.spawn(|| loop {
                let i = next.fetch_add(1, Ordering::Relaxed);
                let Some(path) = s.files.get(i) else { break };
                let r = pec_point(path, &s, &points_dir);
                slots.lock().expect("worker panicked")[i] = Some(r);
            });
        }
    });

    let mut rows = Vec::new();
    let (mut failed, mut unconverged) = (false, false);
    for (path, slot) in s.files.iter().zip(slots.into_inner().expect("worker panicked")) {
        match slot.expect("every point is visited") {
            Ok((row, converged)) => {
                unconverged |= !converged;
                rows.push((row.label, row.e_hf, row.e_vqe, row.e_fci, row.status));
            }
            Err(e) => {
                failed = true;
                eprintln!("{}: {e:#}", path.display());
                let msg = format!("error: {e:#}").replace([',', '\n'], ";");
                rows.push((geometry_label(path), f64::NAN, f64::NAN, f64::NAN, msg));
            }
        }
    }
    fs::write(out.join("pec.csv"), pec_csv(&rows))?;

    if s.svg {
        let numeric: Option<Vec<f64>> = rows.iter().map(|r| label_value(&r.0)).collect();
        let xs = numeric.unwrap_or_else(|| (0..rows.len()).map(|i| i as f64).collect());
        let series = |name, color, f: fn(&(String, f64, f64, f64, String)) -> f64| Series {
            name,
            color,
            points: xs.iter().zip(&rows).map(|(x, r)| (*x, f(r))).collect(),
            lines: true,
        };
        let energies = [series("HF", "#888888", |r| r.1), series("VQE", "#d62728", |r| r.2), series("FCI", "#1f77b4", |r| r.3)];
        fs::write(out.join("pec.svg"), svg::plot("Potential energy curve", "geometry", "energy (Ha)", &energies))?;
        let err = [series("VQE − FCI", "#d62728", |r| r.2 - r.3)];
        fs::write(out.join("pec_error.svg"), svg::plot("Error against FCI", "geometry", "error (Ha)", &err))?;
    }
    if failed {
        return Ok(ExitCode::from(1));
    }
    Ok(exit_for(!unconverged))
}

fn write_bands(run: &Run, s: &Settings, out: &Path) -> Result<BandStructure> {
    let ks: Vec<usize> = (0..run.ints.n_k()).collect();
    let e0 = run.report.result.energy;
    let bs = qse::bands(&run.state, e0, run.problem.hamiltonian(), &run.ints, &ks, s.metric_threshold)?;
    fs::write(out.join("bands.csv"), bs.to_csv())?;
    let Some((gap, k)) = bs.direct_gap() else { bail!("no direct gap: a valence or conduction block is empty") };
    let summary = GapSummary {
        schema_version: SCHEMA_VERSION,
        direct_gap_hartree: gap,
        k_of_gap: run.ints.mesh().k_frac(k),
        k_index_of_gap: k,
        e0,
        vqe_converged: run.report.result.converged,
        spin_splitting: bs.spin_splitting,
    };
    write_json(&out.join("gap.json"), &summary)?;
    if s.svg {
        let pick = |kind| bs.points.iter().filter(|p| p.kind == kind).map(|p| (p.k_frac, p.aligned)).collect();
        let series = [
            Series { name: "valence", color: "#1f77b4", points: pick(BandKind::Valence), lines: false },
            Series { name: "conduction", color: "#d62728", points: pick(BandKind::Conduction), lines: false },
        ];
        fs::write(out.join("bands.svg"), svg::plot("Quasiparticle bands", "k (2π/L)", "energy (Ha)", &series))?;
    }
    Ok(bs)
}

pub fn bands(common: &Common, files: &[PathBuf]) -> Result<ExitCode> {
    let s = Settings::resolve(common, files)?;
    let path = s.single_file()?.to_path_buf();
    let out = out_dir(&s)?.to_path_buf();
    let run = run_vqe(&path, &s)?;
    write_json(&out.join("vqe_result.json"), &run.report)?;
    let bs = write_bands(&run, &s, &out)?;
    if let Some((gap, k)) = bs.direct_gap() {
        eprintln!("direct gap {gap:.8} Ha at k index {k}");
    }
    Ok(exit_for(run.report.result.converged))
}

pub fn diag(common: &Common, files: &[PathBuf], source: DiagSource) -> Result<ExitCode> {
    let mut s = Settings::resolve(common, files)?;
    let (ints, state, energy, h, label, converged) = match source {
        DiagSource::Inline => {
            let run = run_vqe(s.single_file()?, &s)?;
            let energy = run.report.result.energy;
            let converged = run.report.result.converged;
            (run.ints, run.state, energy, run.problem.hamiltonian().clone(), "vqe", converged)
        }
        DiagSource::HartreeFock => {
            let ints = load(s.single_file()?)?;
            let p = problem(&ints, s.variant, s.momentum_filter, &s)?;
            let state = p.reference().clone();
            let energy = expectation(&state, p.hamiltonian())?.re;
            let h = p.hamiltonian().clone();
            (ints, state, energy, h, "hf", true)
        }
        DiagSource::Result(path) => {
            let text = fs::read_to_string(&path).with_context(|| format!("reading {}", path.display()))?;
            let report: VqeReport =
                serde_json::from_str(&text).with_context(|| format!("parsing {}", path.display()))?;
            if s.files.is_empty() {
                s.files.push(report.file.clone());
            }
            let ints = load(s.single_file()?)?;
            let p = problem(&ints, report.variant, report.momentum_filter, &s)?;
            let state = p.state(&report.result.params)?;
            let energy = expectation(&state, p.hamiltonian())?.re;
            let h = p.hamiltonian().clone();
            (ints, state, energy, h, "result", report.result.converged)
        }
    };
    let out = out_dir(&s)?.to_path_buf();
    let (fci_energy, ground) = fci(&h, &ints)?;
    let cm = crystal_momentum(&state, ints.mesh(), &ints.spin_orbitals());
    let report = DiagReport {
        schema_version: SCHEMA_VERSION,
        source: label.into(),
        energy,
        fci_energy,
        kl_over_pi_re: cm.kl_over_pi.re,
        kl_over_pi_im: cm.kl_over_pi.im,
        translation_magnitude: cm.magnitude,
        infidelity: 1.0 - subspace_fidelity(&state, &ground)?,
    };
    write_json(&out.join("diag.json"), &report)?;
    Ok(exit_for(converged))
}

pub fn validate(files: &[PathBuf], manifest: Option<&Path>) -> Result<ExitCode> {
    if files.is_empty() && manifest.is_none() {
        bail!("nothing to validate: give integral files and/or --manifest DIR");
    }
    let mut ok = true;
    for f in files {
        match integrals::load(f) {
            Ok(ints) => println!(
                "ok    {}  n_k={} n_orb={} n_elec={} qubits={} eri={}",
                f.display(),
                ints.n_k(),
                ints.n_orb(),
                ints.n_elec(),
                ints.n_qubits(),
                ints.two_body().count()
            ),
            Err(e) => {
                ok = false;
                println!("FAIL  {}: {e}", f.display());
            }
        }
    }
    if let Some(root) = manifest {
        let report = verify_manifest(root)?;
        print!("{report}");
        ok &= report.ok();
    }
    Ok(if ok { ExitCode::SUCCESS } else { ExitCode::from(1) })
}
