use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use kvqe::oracle::{ground_manifold, subspace_fidelity, SectorSpec};
use kvqe::statevec::hartree_fock_state;
use kvqe::vqe::qubit_hamiltonian;
use serde_json::Value;

fn refdata(rel: &str) -> PathBuf {
    kvqe::refdata::default_root().join(rel)
}

fn kvqe(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_kvqe")).args(args).output().unwrap()
}

fn run(args: &[&str], out: &Path, files: &[PathBuf]) -> Output {
    let mut all: Vec<String> = args.iter().map(|s| s.to_string()).collect();
    all.extend(["--out".to_string(), out.display().to_string()]);
    all.extend(files.iter().map(|f| f.display().to_string()));
    let refs: Vec<&str> = all.iter().map(String::as_str).collect();
    kvqe(&refs)
}

fn read_json(path: &Path) -> Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

fn keys(v: &Value) -> Vec<String> {
    let mut k: Vec<String> = v.as_object().unwrap().keys().cloned().collect();
    k.sort();
    k
}

fn sorted(names: &[&str]) -> Vec<String> {
    let mut k: Vec<String> = names.iter().map(|s| s.to_string()).collect();
    k.sort();
    k
}

#[test]
fn vqe_writes_a_converged_result() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["vqe"], dir.path(), &[refdata("synthetic/toy_gamma.kint.json")]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("vqe_result.json"));
    assert_eq!(
        keys(&v),
        sorted(&[
            "file", "variant", "momentum_filter", "n_qubits", "n_params", "e_hf", "schema_version", "energy",
            "params", "trace", "converged", "termination", "iterations", "evaluations", "wall_time_s",
        ])
    );
    assert_eq!(v["schema_version"], 1);
    assert_eq!(v["variant"], "bUCCSD-Real");
    assert_eq!(v["converged"], true);
    assert!((v["energy"].as_f64().unwrap() + 1.2).abs() < 1e-8);
}

#[test]
fn requested_diagnostics_are_added_to_the_result() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let file = refdata("h_chain_nk3/R1.4.kint.json");
    fs::write(
        &cfg,
        serde_json::json!({"files": [file], "tasks": ["vqe", "fci", "momentum", "fidelity"]}).to_string(),
    )
    .unwrap();
    let out = kvqe(&["vqe", "--config", cfg.to_str().unwrap(), "--out", dir.path().to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let v = read_json(&dir.path().join("vqe_result.json"));
    let fci = v["fci_energy"].as_f64().unwrap();
    assert!((fci - kvqe::integrals::load(&file).unwrap().reference("fci").unwrap()).abs() < 1e-8);
    let err = v["error_vs_fci"].as_f64().unwrap();
    assert!((v["energy"].as_f64().unwrap() - fci - err).abs() < 1e-12);
    assert!((0.0..1.6e-3).contains(&err));
    assert!(v["kl_over_pi_im"].as_f64().unwrap().abs() < 1e-10);
    assert!((0.0..1.0).contains(&v["infidelity"].as_f64().unwrap()));
}

#[test]
fn unconverged_run_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["vqe", "--max-iter", "1"], dir.path(), &[refdata("h_dimer_chain_nk2/intra1.2_inter4.0.kint.json")]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(read_json(&dir.path().join("vqe_result.json"))["converged"], false);
}

#[test]
fn input_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let missing = run(&["vqe"], dir.path(), &[dir.path().join("absent.kint.json")]);
    assert_eq!(missing.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&missing.stderr).starts_with("error: "));

    let bad = dir.path().join("bad.kint.json");
    fs::write(&bad, "{\"meta\": {}}").unwrap();
    assert_eq!(run(&["vqe"], dir.path(), &[bad]).status.code(), Some(1));

    let single = run(&["pec"], dir.path(), &[refdata("h_chain_nk3/R1.4.kint.json")]);
    assert_eq!(single.status.code(), Some(1));
}

#[test]
fn config_is_read_and_overridden_by_flags() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    let file = refdata("synthetic/toy_gamma.kint.json");
    fs::write(
        &cfg,
        serde_json::json!({
            "files": [file],
            "variant": "iUCCD",
            "out": "results",
            "optimizer": {"gtol": 1e-7},
        })
        .to_string(),
    )
    .unwrap();
    let out = kvqe(&["vqe", "--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    assert_eq!(read_json(&dir.path().join("results/vqe_result.json"))["variant"], "iUCCD");

    let other = dir.path().join("other");
    let out = kvqe(&[
        "vqe",
        "--config",
        cfg.to_str().unwrap(),
        "--variant",
        "bUCCD-Real",
        "--out",
        other.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0));
    assert_eq!(read_json(&other.join("vqe_result.json"))["variant"], "bUCCD-Real");
}

#[test]
fn unknown_config_key_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.json");
    fs::write(&cfg, r#"{"varient": "iUCCD"}"#).unwrap();
    let out = kvqe(&["vqe", "--config", cfg.to_str().unwrap(), refdata("synthetic/toy_gamma.kint.json").to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn pec_writes_csv_points_and_plots() {
    let dir = tempfile::tempdir().unwrap();
    let files = [refdata("h_chain_nk3/R1.0.kint.json"), refdata("h_chain_nk3/R1.4.kint.json")];
    let out = run(&["pec", "--jobs", "2"], dir.path(), &files);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("pec.csv")).unwrap();
    let lines: Vec<&str> = csv.lines().collect();
    assert_eq!(lines[0], "geometry_label,e_hf,e_vqe,e_fci,error_vs_fci,status");
    assert_eq!(lines.len(), 3);
    assert!(lines[1].starts_with("R1.0,") && lines[2].starts_with("R1.4,"));
    for line in &lines[1..] {
        let cols: Vec<&str> = line.split(',').collect();
        assert_eq!(cols.len(), 6);
        let (e_vqe, e_fci, err): (f64, f64, f64) =
            (cols[2].parse().unwrap(), cols[3].parse().unwrap(), cols[4].parse().unwrap());
        assert!((e_vqe - e_fci - err).abs() < 1e-9);
        assert_eq!(cols[5], "ok");
    }
    for name in ["points/R1.0.json", "points/R1.4.json", "pec.svg", "pec_error.svg"] {
        assert!(dir.path().join(name).exists(), "{name}");
    }
    assert!(fs::read_to_string(dir.path().join("pec.svg")).unwrap().starts_with("<svg"));
}

#[test]
fn bands_on_free_fermions_reproduce_the_one_body_gap() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["bands"], dir.path(), &[refdata("synthetic/free_fermion.kint.json")]);
    assert_eq!(out.status.code(), Some(0));
    let gap = read_json(&dir.path().join("gap.json"));
    assert_eq!(
        keys(&gap),
        sorted(&["schema_version", "direct_gap_hartree", "k_of_gap", "k_index_of_gap", "e0", "vqe_converged", "spin_splitting"])
    );
    assert!((gap["direct_gap_hartree"].as_f64().unwrap() - 1.4).abs() < 1e-10);
    assert_eq!(gap["k_index_of_gap"], 1);
    let csv = fs::read_to_string(dir.path().join("bands.csv")).unwrap();
    assert_eq!(csv.lines().next().unwrap(), "k_index,k_frac,band_kind,band_index,energy_hartree,energy_aligned_hartree");
    assert_eq!(csv.lines().count(), 5);
    assert!(dir.path().join("bands.svg").exists());
}

#[test]
fn diag_of_hartree_fock_matches_the_oracle() {
    let dir = tempfile::tempdir().unwrap();
    let file = refdata("h_chain_nk3/R2.0.kint.json");
    let out = run(&["diag", "--hf"], dir.path(), std::slice::from_ref(&file));
    assert_eq!(out.status.code(), Some(0));
    let d = read_json(&dir.path().join("diag.json"));
    assert_eq!(
        keys(&d),
        sorted(&[
            "schema_version", "source", "energy", "fci_energy", "KL_over_pi_re", "KL_over_pi_im",
            "translation_magnitude", "infidelity",
        ])
    );
    let ints = kvqe::integrals::load(&file).unwrap();
    let h = qubit_hamiltonian(&ints).unwrap();
    let (e0, manifold) = ground_manifold(&h, &SectorSpec::particles(ints.n_elec()), 1e-8).unwrap();
    let hf = hartree_fock_state(&ints).unwrap();
    let want = 1.0 - subspace_fidelity(&hf, &manifold).unwrap();
    assert!((d["infidelity"].as_f64().unwrap() - want).abs() < 1e-10);
    assert!((d["fci_energy"].as_f64().unwrap() - e0).abs() < 1e-10);
    assert!((d["energy"].as_f64().unwrap() - ints.reference("hf").unwrap()).abs() < 1e-8);
    assert!((d["translation_magnitude"].as_f64().unwrap() - 1.0).abs() < 1e-12);
}

#[test]
fn diag_reuses_a_saved_result() {
    let dir = tempfile::tempdir().unwrap();
    let file = refdata("synthetic/toy_gamma.kint.json");
    assert_eq!(run(&["vqe"], dir.path(), std::slice::from_ref(&file)).status.code(), Some(0));
    let result = dir.path().join("vqe_result.json");
    let out = run(&["diag", "--result", result.to_str().unwrap()], dir.path(), &[file]);
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let d = read_json(&dir.path().join("diag.json"));
    assert!(d["infidelity"].as_f64().unwrap() < 1e-8);
}

#[test]
fn validate_flags_a_corrupted_file() {
    let dir = tempfile::tempdir().unwrap();
    let root = kvqe::refdata::default_root();
    let manifest = kvqe::refdata::Manifest::load(&root).unwrap();
    for e in &manifest.files {
        let to = dir.path().join(&e.path);
        fs::create_dir_all(to.parent().unwrap()).unwrap();
        fs::copy(root.join(&e.path), to).unwrap();
    }
    fs::copy(root.join("manifest.json"), dir.path().join("manifest.json")).unwrap();

    let ok = kvqe(&["validate", "--manifest", dir.path().to_str().unwrap()]);
    assert_eq!(ok.status.code(), Some(0), "{}", String::from_utf8_lossy(&ok.stdout));

    let target = dir.path().join("h_chain_nk3/R1.4.kint.json");
    let text = fs::read_to_string(&target).unwrap().replacen("\"n_elec\"", " \"n_elec\"", 1);
    fs::write(&target, text).unwrap();
    let bad = kvqe(&["validate", "--manifest", dir.path().to_str().unwrap()]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stdout).contains("h_chain_nk3/R1.4.kint.json"));
}

#[test]
fn pec_marks_unconverged_points() {
    let dir = tempfile::tempdir().unwrap();
    let files = [refdata("h_chain_nk3/R1.0.kint.json"), refdata("h_chain_nk3/R1.4.kint.json")];
    let out = run(&["pec", "--max-iter", "1", "--no-svg"], dir.path(), &files);
    assert_eq!(out.status.code(), Some(2));
    let csv = fs::read_to_string(dir.path().join("pec.csv")).unwrap();
    assert!(csv.lines().skip(1).all(|l| l.ends_with(",max_iterations")), "{csv}");
    assert!(!dir.path().join("pec.svg").exists());
}
