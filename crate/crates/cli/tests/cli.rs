use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use delaycert_cli::files::{CertificateFile, GainFile};

fn example(name: &str) -> String {
    PathBuf::from(env!("CARGO_MANIFEST_DIR"))
        .join("examples")
        .join(name)
        .to_string_lossy()
        .into_owned()
}

fn delaycert(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_delaycert"))
        .args(args)
        .env_remove("DELAYCERT_SOLVER_SETTINGS")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn path_str(p: &Path) -> &str {
    p.to_str().unwrap()
}

#[test]
fn analyze_writes_reverifiable_certificate() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let o = delaycert(&[
        "analyze",
        &example("system1.json"),
        "--alpha",
        "0",
        "--mode",
        "th1",
        "--out",
        path_str(&cert),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("gamma = "));

    let file = CertificateFile::load(&cert).unwrap();
    assert!(file.verify().unwrap());
    assert!(file.gamma >= 1.0);

    let o = delaycert(&[
        "check-certificate",
        path_str(&cert),
        "--system",
        &example("system1.json"),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).starts_with("VALID"));

    // a tampered certificate no longer verifies
    let mut bad = file.clone();
    bad.gamma *= 0.5;
    fs::write(&cert, serde_json::to_string(&bad).unwrap()).unwrap();
    let o = delaycert(&["check-certificate", path_str(&cert)]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).starts_with("INVALID"));

    // and one for another system is refused outright
    let o = delaycert(&[
        "check-certificate",
        path_str(&cert),
        "--system",
        &example("system2.json"),
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn analyze_beyond_delay_bound_is_infeasible() {
    let o = delaycert(&["analyze", &example("system1.json"), "--delay", "2.0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("INFEASIBLE"));
}

#[test]
fn malformed_inputs_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, "{\"n\": 2, \"A\": [[1, 0], [0, 1]]").unwrap();
    assert_eq!(delaycert(&["analyze", path_str(&bad)]).status.code(), Some(1));
    fs::write(&bad, r#"{"n":1,"A":[[1]],"Ad":[[0]],"AD":[[0]],"h":1,"typo":1}"#).unwrap();
    assert_eq!(delaycert(&["analyze", path_str(&bad)]).status.code(), Some(1));
    assert_eq!(
        delaycert(&["analyze", &example("controlled.json")]).status.code(),
        Some(1)
    );
    assert_eq!(delaycert(&["analyze"]).status.code(), Some(1));
    assert_eq!(
        delaycert(&["analyze", &example("system1.json"), "--mode", "bogus"])
            .status
            .code(),
        Some(1)
    );
    assert_eq!(delaycert(&["--help"]).status.code(), Some(0));
}

#[test]
fn mode_aliases_match_canonical_names() {
    let run = |mode: &str| stdout(&delaycert(&["analyze", &example("system1.json"), "--mode", mode]));
    assert_eq!(run("nullspace"), run("projected"));
    assert_eq!(run("cor1-epsneq1"), run("structured-skip-delayed"));
}

#[test]
fn settings_file_from_environment() {
    let dir = tempfile::tempdir().unwrap();
    let settings = dir.path().join("settings.json");
    fs::write(
        &settings,
        r#"{"max_iterations": 1, "duality_gap_tol": 1e-9, "step_fraction": 0.98, "feasibility_margin": 1e-7}"#,
    )
    .unwrap();
    let o = Command::new(env!("CARGO_BIN_EXE_delaycert"))
        .args(["analyze", &example("system1.json")])
        .env("DELAYCERT_SOLVER_SETTINGS", &settings)
        .output()
        .unwrap();
    // one Newton step is not enough to conclude anything
    assert_eq!(o.status.code(), Some(1), "{}", stdout(&o));
    fs::write(&settings, "not json").unwrap();
    let o = delaycert(&["--settings", path_str(&settings), "analyze", &example("system1.json")]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn sweep_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let a = dir.path().join("a.csv");
    let b = dir.path().join("b.csv");
    let frontier = dir.path().join("f.csv");
    for out in [&a, &b] {
        let o = delaycert(&[
            "sweep",
            &example("system1.json"),
            "--h-grid",
            "0.5:1.5:3",
            "--alpha-grid",
            "0,0.3",
            "--mode",
            "spectral",
            "--out",
            path_str(out),
            "--frontier-out",
            path_str(&frontier),
        ]);
        assert_eq!(o.status.code(), Some(0));
    }
    let text = fs::read_to_string(&a).unwrap();
    assert_eq!(text, fs::read_to_string(&b).unwrap());
    let lines: Vec<&str> = text.lines().collect();
    assert_eq!(lines[0], "h,alpha,feasible,alpha_spec");
    assert_eq!(lines.len(), 7);
    assert!(lines[1].starts_with("0.5,0,1,"));
    let f = fs::read_to_string(&frontier).unwrap();
    assert!(f.starts_with("h,alpha_star,alpha_spec\n"));
}

#[test]
fn empty_sweep_grid_is_an_error() {
    let o = delaycert(&["sweep", &example("system1.json"), "--h-grid", "", "--alpha-grid", "0"]);
    assert_eq!(o.status.code(), Some(1));
    let o = delaycert(&[
        "sweep",
        &example("system1.json"),
        "--h-grid",
        "0.1:1:0",
        "--alpha-grid",
        "0",
    ]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn interval_prints_csv_row() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("row.csv");
    let o = delaycert(&[
        "interval",
        &example("system1.json"),
        "--alpha",
        "0.5",
        "--tol",
        "1e-3",
        "--out",
        path_str(&out),
    ]);
    assert_eq!(o.status.code(), Some(0));
    let csv = fs::read_to_string(&out).unwrap();
    let row: Vec<&str> = csv.lines().nth(1).unwrap().split(',').collect();
    assert_eq!(row[1], "free-slack");
    let (lo, hi): (f64, f64) = (row[2].parse().unwrap(), row[3].parse().unwrap());
    assert!((lo - 0.637).abs() < 0.01 && (hi - 1.006).abs() < 0.01, "{csv}");

    let o = delaycert(&["interval", &example("system1.json"), "--alpha", "3"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn synthesis_and_closed_loop_simulation() {
    let dir = tempfile::tempdir().unwrap();
    let k = dir.path().join("k.json");
    let kc = dir.path().join("kc.json");
    let l = dir.path().join("l.json");
    let sys = example("controlled.json");
    let o = delaycert(&[
        "synthesize",
        &sys,
        "--alpha",
        "0",
        "--delay",
        "2.0",
        "--out",
        path_str(&k),
        "--certificate-out",
        path_str(&kc),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("K[0]"));
    let gain = GainFile::load(&k).unwrap();
    // K·X reproduces the stored transformed gain
    let kx = &gain.gain * &gain.congruence;
    assert!((&kx - &gain.transformed_gain).max_abs() < 1e-8 * (1.0 + gain.transformed_gain.max_abs()));
    assert!(CertificateFile::load(&kc).unwrap().verify().unwrap());

    let o = delaycert(&["synthesize", &sys, "--alpha", "1", "--delay", "0.6"]);
    assert_eq!(o.status.code(), Some(2));

    let o = delaycert(&[
        "synthesize",
        &sys,
        "--alpha",
        "0",
        "--kind",
        "observer",
        "--out",
        path_str(&l),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("L[0]"));

    let o = delaycert(&[
        "simulate",
        &sys,
        "--delay",
        "2.0",
        "--controller",
        path_str(&k),
        "--certificate",
        path_str(&kc),
        "--T",
        "20",
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    assert!(stdout(&o).contains("ENVELOPE HOLDS"));

    let traj = dir.path().join("loop.csv");
    let o = delaycert(&[
        "simulate",
        &sys,
        "--controller",
        path_str(&k),
        "--observer",
        path_str(&l),
        "--history",
        "random:5",
        "--T",
        "20",
        "--out",
        path_str(&traj),
    ]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let csv = fs::read_to_string(&traj).unwrap();
    assert!(csv.starts_with("t,x_1,x_2,x_3,x_4\n"));

    // a gain without a controlled system is refused
    let o = delaycert(&["simulate", &example("system1.json"), "--controller", path_str(&k)]);
    assert_eq!(o.status.code(), Some(1));
}

#[test]
fn simulate_reports_envelope_and_divergence() {
    let dir = tempfile::tempdir().unwrap();
    let cert = dir.path().join("cert.json");
    let sys = example("system1.json");
    assert_eq!(
        delaycert(&[
            "analyze",
            &sys,
            "--alpha",
            "0.5",
            "--delay",
            "0.8",
            "--out",
            path_str(&cert)
        ])
        .status
        .code(),
        Some(0)
    );
    let o = delaycert(&[
        "simulate",
        &sys,
        "--delay",
        "0.8",
        "--history",
        "constant:1,1",
        "--certificate",
        path_str(&cert),
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert!(stdout(&o).contains("ENVELOPE HOLDS"));
    assert!(stdout(&o).contains("FUNCTIONAL NONINCREASING"));

    // certificate issued for a different delay
    let o = delaycert(&["simulate", &sys, "--certificate", path_str(&cert)]);
    assert_eq!(o.status.code(), Some(1));

    let o = delaycert(&["simulate", &sys, "--delay", "5", "--T", "150"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(stdout(&o).contains("DIVERGED"));

    // step above h/16
    assert_eq!(delaycert(&["simulate", &sys, "--dt", "0.5"]).status.code(), Some(1));
    assert_eq!(
        delaycert(&["simulate", &sys, "--history", "constant:1,1,1"])
            .status
            .code(),
        Some(1)
    );
}

#[test]
fn simulate_csv_is_deterministic() {
    let dir = tempfile::tempdir().unwrap();
    let sys = example("system2.json");
    let mut texts = Vec::new();
    for name in ["a.csv", "b.csv"] {
        let out = dir.path().join(name);
        let o = delaycert(&[
            "simulate",
            &sys,
            "--history",
            "poly:1,0;0.5,-1",
            "--T",
            "5",
            "--out",
            path_str(&out),
            "--derivatives",
        ]);
        assert_eq!(o.status.code(), Some(0));
        texts.push(fs::read_to_string(&out).unwrap());
    }
    assert_eq!(texts[0], texts[1]);
    assert!(texts[0].starts_with("t,x_1,x_2,dx_1,dx_2\n"));
}

#[test]
fn inequality_report_is_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("report.txt");
    let a = delaycert(&[
        "verify-inequalities",
        "--trials",
        "25",
        "--seed",
        "9",
        "--out",
        path_str(&out),
    ]);
    let b = delaycert(&["verify-inequalities", "--trials", "25", "--seed", "9"]);
    assert_eq!(a.status.code(), Some(0));
    assert_eq!(stdout(&a), stdout(&b));
    assert_eq!(fs::read_to_string(&out).unwrap(), stdout(&a));
    assert!(stdout(&a).contains("verdict: ALL HOLD"));

    let empty = delaycert(&["verify-inequalities", "--trials", "0"]);
    assert_eq!(empty.status.code(), Some(0));
    assert!(stdout(&empty).contains("0 trials"));
}
