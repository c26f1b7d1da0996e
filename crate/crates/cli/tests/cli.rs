use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn tqc(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_tqc")).args(args).output().expect("binary runs")
}

fn write_config(dir: &Path, body: &str) -> String {
    let path = dir.join("run.toml");
    fs::write(&path, body).unwrap();
    path.display().to_string()
}

fn run_in(cmd: &str, config: &str, out: &Path) -> Output {
    tqc(&[cmd, "--config", config, "--out", out.to_str().unwrap()])
}

fn stderr_json(o: &Output) -> Value {
    serde_json::from_slice(&o.stderr).unwrap_or_else(|e| panic!("stderr is not JSON ({e}): {}", String::from_utf8_lossy(&o.stderr)))
}

const SMALL: &str = "omega = 1.2\nkappa = 1.0\n[numerics]\nt_end = 5.0\ngrid = 64\nbirkhoff_t_end = 200.0\n";

#[test]
fn missing_kappa_is_reported_as_json() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "omega = 1.2\n");
    let out = run_in("simulate", &cfg, &tmp.path().join("out"));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_eq!(err["code"], "missing_key");
    assert!(err["message"].as_str().unwrap().contains("kappa"));
    assert!(!tmp.path().join("out").exists());
}

#[test]
fn usage_errors_exit_with_code_two() {
    let out = tqc(&["bogus", "--config", "x.toml"]);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "usage");
    assert!(tqc(&["--help"]).status.success());
}

#[test]
fn single_branch_drift_matches_closed_form() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        "omega = 1.5\nkappa = 1.0\neta = 0.0\n[initial]\nm1 = [0.0, 0.0, -1.0]\nm2 = [0.0, 0.0, 0.0]\n[numerics]\ngrid = 128\nbirkhoff_t_end = 2000.0\n",
    );
    let dir = tmp.path().join("drift");
    let out = run_in("drift", &cfg, &dir);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let report: Value = serde_json::from_str(&fs::read_to_string(dir.join("drift.json")).unwrap()).unwrap();
    let w = report["omega_phi"].as_f64().unwrap();
    let a1 = report["amplitudes"][0].as_f64().unwrap();
    let exact = (w * w - a1 * a1).sqrt();
    assert!((exact - (1.5f64 * 1.5 - 1.0).sqrt()).abs() < 1e-12);

    let estimates = report["estimates"].as_array().unwrap();
    let methods: Vec<&str> = estimates.iter().map(|e| e["method"].as_str().unwrap()).collect();
    assert_eq!(methods, ["quadrature", "elliptic", "birkhoff"]);
    for e in estimates {
        let tol = if e["method"] == "birkhoff" { 1e-2 } else { 1e-10 };
        assert!((e["nu"].as_f64().unwrap() - exact).abs() < tol, "{e}");
    }
}

#[test]
fn repeated_runs_are_byte_identical() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}lyapunov_t_end = 20.0\n"));
    for cmd in ["simulate", "psi", "lyapunov"] {
        let (a, b) = (tmp.path().join(format!("{cmd}_a")), tmp.path().join(format!("{cmd}_b")));
        assert!(run_in(cmd, &cfg, &a).status.success());
        assert!(run_in(cmd, &cfg, &b).status.success());
        let mut names: Vec<_> = fs::read_dir(&a).unwrap().map(|e| e.unwrap().file_name()).collect();
        names.sort();
        assert!(!names.is_empty());
        for n in names {
            assert_eq!(fs::read(a.join(&n)).unwrap(), fs::read(b.join(&n)).unwrap(), "{cmd}: {n:?} differs");
        }
    }
}

#[test]
fn seed_override_reaches_the_tangent_draw() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), &format!("{SMALL}lyapunov_t_end = 20.0\n"));
    let run = |seed: &str, name: &str| {
        let dir = tmp.path().join(name);
        let out = tqc(&["lyapunov", "--config", &cfg, "--out", dir.to_str().unwrap(), "--seed", seed]);
        assert!(out.status.success());
        fs::read(dir.join("lyapunov.csv")).unwrap()
    };
    assert_ne!(run("1", "s1"), run("2", "s2"));
}

#[test]
fn failed_run_leaves_nothing_behind() {
    let tmp = tempfile::tempdir().unwrap();
    // 100 / 0.0625 = 1600 samples is not a power of two; the line spectrum
    // files are written before this is detected.
    let cfg = write_config(tmp.path(), &format!("{SMALL}spectrum_t_end = 100.0\n"));
    let dir = tmp.path().join("run");
    let out = run_in("spectrum", &cfg, &dir);
    assert_eq!(out.status.code(), Some(2));
    assert_eq!(stderr_json(&out)["code"], "invalid_value");
    assert!(!dir.exists());

    // a pre-existing directory survives, minus anything this run wrote
    fs::create_dir(&dir).unwrap();
    fs::write(dir.join("keep.txt"), "x").unwrap();
    assert_eq!(run_in("spectrum", &cfg, &dir).status.code(), Some(2));
    let left: Vec<_> = fs::read_dir(&dir).unwrap().map(|e| e.unwrap().file_name()).collect();
    assert_eq!(left, ["keep.txt"]);
}

#[test]
fn pinned_drive_is_a_core_error() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(tmp.path(), "omega = 0.2\nkappa = 1.0\n[numerics]\ngrid = 64\n");
    let out = run_in("psi", &cfg, &tmp.path().join("psi"));
    assert_eq!(out.status.code(), Some(2));
    let err = stderr_json(&out);
    assert_ne!(err["module"], "cli");
}

#[test]
fn every_command_produces_its_files() {
    let tmp = tempfile::tempdir().unwrap();
    let cfg = write_config(
        tmp.path(),
        &format!(
            "{SMALL}reconstruct_t_end = 10.0\nspectrum_t_end = 2048.0\nspectrum_dt = 0.125\nlyapunov_t_end = 20.0\nquantum_t_end = 0.5\nquantum_dt_out = 0.1\nn_values = [2]\n"
        ),
    );
    let expect: [(&str, &[&str]); 8] = [
        ("simulate", &["trajectory.csv", "conservation.json", "trajectory.svg"]),
        ("reduce", &["frame.json", "phase.csv", "phase.svg"]),
        ("drift", &["drift.json"]),
        ("psi", &["psi.csv", "psi_summary.json", "psi.svg"]),
        ("spectrum", &["lines.csv", "lattice.csv", "spectrum.json", "lines.svg", "lattice.svg"]),
        ("lyapunov", &["lyapunov.csv", "lyapunov.svg"]),
        ("quantum", &["quantum_N2.csv", "quantum_report.json", "quantum.svg"]),
        ("figures", &["fig1b_psi.svg", "fig1d_theta_compare.csv", "fig2c_lattice.svg", "fig2e_lyapunov.csv", "figures_summary.json"]),
    ];
    for (cmd, files) in expect {
        let dir = tmp.path().join(cmd);
        let out = run_in(cmd, &cfg, &dir);
        assert!(out.status.success(), "{cmd}: {}", String::from_utf8_lossy(&out.stderr));
        let listed = String::from_utf8(out.stdout).unwrap();
        for f in files {
            assert!(dir.join(f).is_file(), "{cmd} did not write {f}");
            assert!(listed.contains(f));
        }
    }
    let svg = fs::read_to_string(tmp.path().join("simulate/trajectory.svg")).unwrap();
    assert!(svg.starts_with("<svg") && svg.trim_end().ends_with("</svg>"));
}
