use std::path::Path;
use std::process::{Command, Output};

use qd_exciton::export::{read_table_csv, read_traces_csv, read_trajectory_csv};
use qd_exciton::trace::TraceKind;

const BIN: &str = env!("CARGO_BIN_EXE_qd-exciton");

fn config_path() -> String {
    format!("{}/../../configs/default.toml", env!("CARGO_MANIFEST_DIR"))
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().expect("binary runs")
}

fn read_dir_sorted(dir: &Path) -> Vec<(String, Vec<u8>)> {
    let mut files: Vec<_> = std::fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (p.file_name().unwrap().to_string_lossy().into_owned(), std::fs::read(&p).unwrap())
        })
        .collect();
    files.sort();
    files
}

#[test]
fn same_seed_gives_identical_bytes() {
    let a = tempfile::tempdir().unwrap();
    let b = tempfile::tempdir().unwrap();
    let cfg = config_path();
    for (dir, workers) in [(&a, "1"), (&b, "4")] {
        let out = run(&[
            "--config", &cfg, "--experiment", "fig2", "--seed", "11", "--workers", workers,
            "--out", dir.path().to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    }
    let fa = read_dir_sorted(a.path());
    let fb = read_dir_sorted(b.path());
    assert_eq!(fa.iter().map(|f| &f.0).collect::<Vec<_>>(), fb.iter().map(|f| &f.0).collect::<Vec<_>>());
    for (x, y) in fa.iter().zip(&fb) {
        assert!(x.1 == y.1, "{} differs between runs", x.0);
    }
    let names: Vec<&str> = fa.iter().map(|f| f.0.as_str()).collect();
    assert_eq!(
        names,
        ["fig2_basis.csv", "fig2_fidelity.csv", "fig2_summary.json", "fig2_trajectory.csv"]
    );
}

#[test]
fn poisson_seed_changes_output() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = std::fs::read_to_string(config_path())
        .unwrap()
        .replace("detection.poisson_enabled = false", "detection.poisson_enabled = true");
    let cfg = dir.path().join("poisson.toml");
    std::fs::write(&cfg, cfg_text).unwrap();
    let mut traces = Vec::new();
    for seed in ["1", "2", "1"] {
        let out_dir = dir.path().join(format!("s{seed}"));
        let out = run(&[
            "--config", cfg.to_str().unwrap(), "--experiment", "fig1d", "--seed", seed,
            "--out", out_dir.to_str().unwrap(),
        ]);
        assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
        traces.push(std::fs::read(out_dir.join("fig1d_traces.csv")).unwrap());
    }
    assert_ne!(traces[0], traces[1]);
    assert_eq!(traces[0], traces[2]);
}

#[test]
fn emitted_csv_files_parse_back() {
    let dir = tempfile::tempdir().unwrap();
    let out = run(&["--experiment", "fig2", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let stdout = String::from_utf8_lossy(&out.stdout);
    assert_eq!(stdout.lines().count(), 1);
    assert!(stdout.starts_with("fig2: PASS"), "{stdout}");

    let fid = read_traces_csv(std::fs::File::open(dir.path().join("fig2_fidelity.csv")).unwrap(), TraceKind::Intensity).unwrap();
    assert_eq!(fid.len(), 12);
    assert!(fid.iter().any(|t| t.channel == "f_in_D"));
    let traj = read_trajectory_csv(std::fs::File::open(dir.path().join("fig2_trajectory.csv")).unwrap()).unwrap();
    assert!(traj.iter().all(|(_, s)| s.check().is_ok()));

    let out = run(&["--experiment", "sweep", "--out", dir.path().to_str().unwrap()]);
    assert!(out.status.success());
    let table = read_table_csv(std::fs::File::open(dir.path().join("sweep_splitting.csv")).unwrap()).unwrap();
    assert_eq!(table.rows.len(), 19);
    let summary: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("sweep_summary.json")).unwrap()).unwrap();
    assert_eq!(summary["experiment"], "sweep");
    assert_eq!(summary["physicality_violations"], 0);
}

#[test]
fn unknown_experiment_is_rejected() {
    let out = run(&["--experiment", "fig9"]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("unknown experiment `fig9`"), "{err}");
}

#[test]
fn config_errors_name_line_and_key() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.toml");
    std::fs::write(&cfg, "experiment = \"fig2\"\ndevice.tau_r = 1.28\ndevice.T_spn = 78.0\n").unwrap();
    let out = run(&["--config", cfg.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(2));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("T_spn"), "{err}");
    assert!(err.contains("line 3"), "{err}");
    assert!(err.contains("bad.toml"), "{err}");

    let out = run(&[]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn check_flag_turns_failures_into_exit_status() {
    let dir = tempfile::tempdir().unwrap();
    let cfg_text = std::fs::read_to_string(config_path())
        .unwrap()
        .replace("acceptance.period_rel_tol = 0.01", "acceptance.period_rel_tol = 0.0");
    let cfg = dir.path().join("strict.toml");
    std::fs::write(&cfg, cfg_text).unwrap();
    let out_dir = dir.path().join("o");
    let base = ["--config", cfg.to_str().unwrap(), "--experiment", "fig1d", "--out", out_dir.to_str().unwrap()];

    let out = run(&base);
    assert!(out.status.success());
    assert!(String::from_utf8_lossy(&out.stdout).starts_with("fig1d: FAIL"));

    let mut strict = base.to_vec();
    strict.push("--check");
    let out = run(&strict);
    assert_eq!(out.status.code(), Some(1));
}
