use std::path::{Path, PathBuf};
use std::process::Command;

use constraints_cli::config::RunConfig;
use constraints_cli::{run, EXIT_CONFIG, EXIT_INFEASIBLE, EXIT_OK};
use constraints_core::fields::cfld::FieldFile;

fn data(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn configs(name: &str) -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs").join(name)
}

fn binary() -> Command {
    Command::new(env!("CARGO_BIN_EXE_constraints"))
}

fn config(text: &str) -> RunConfig {
    RunConfig::from_toml(text).unwrap()
}

#[test]
fn bootstrap_at_t_two_is_closed_form() {
    let cfg = config(
        r#"
        mode = "bootstrap"
        [bootstrap]
        p = "16/5"
        t = 2
        i_max = 6
        "#,
    );
    let outcome = run(&cfg);
    assert_eq!(outcome.exit_code, EXIT_OK, "{:?}", outcome.error);
    let b = outcome.report.bootstrap.expect("bootstrap section");
    let expect: Vec<String> = (0..=6).map(|i| (2u64.pow(i + 1) + 2).to_string()).collect();
    assert_eq!(b.exact.q, expect);
    assert_eq!(b.exact.t0, "12/7");
    assert_eq!(b.exact.p0.as_deref(), Some("8"));
    assert!(b.strictly_increasing && b.escapes);
}

#[test]
fn bootstrap_at_threshold_is_rejected() {
    let cfg = config("mode = \"bootstrap\"\n[bootstrap]\np = \"16/5\"\nt = \"12/7\"\n");
    let outcome = run(&cfg);
    assert_eq!(outcome.exit_code, EXIT_INFEASIBLE);
    assert!(outcome.report.bootstrap.unwrap().constant);
}

#[test]
fn check_accepts_stored_exact_solution() {
    let outcome = run(&RunConfig::load(&data("constant-check.toml")).unwrap());
    assert_eq!(outcome.exit_code, EXIT_OK, "{:?}", outcome.error);
    let report = outcome.report;
    assert!(report.failed_checks().is_empty());
    assert!(report.find_check("hamiltonian_l2").unwrap().value <= 1e-12);
    assert!(report.find_check("momentum_l2").unwrap().value <= 1e-14);
}

#[test]
fn check_rejects_wrong_solution() {
    let mut cfg = RunConfig::load(&data("constant-check.toml")).unwrap();
    cfg.seed.sigma_norm = Some(0.3);
    let outcome = run(&cfg);
    assert_eq!(outcome.exit_code, constraints_cli::EXIT_SOLVER);
    assert_eq!(outcome.report.status.error_kind.as_deref(), Some("check"));
}

#[test]
fn stability_with_vanishing_tau_is_degenerate() {
    let cfg = config(
        r#"
        mode = "stability"
        m = 8
        [seed]
        tau = { constant = 0.0 }
        sigma_norm = 0.01
        "#,
    );
    let outcome = run(&cfg);
    assert_eq!(outcome.exit_code, EXIT_INFEASIBLE);
    assert_eq!(outcome.report.status.error_kind.as_deref(), Some("DegenerateData"));
}

#[test]
fn counter_seed_exits_infeasible() {
    let outcome = run(&RunConfig::load(&configs("counter-seed.toml")).unwrap());
    assert_eq!(outcome.exit_code, EXIT_INFEASIBLE);
    assert_eq!(outcome.report.status.error_kind.as_deref(), Some("ConditionViolated"));
}

#[test]
fn config_errors_exit_four() {
    for text in [
        "mode = \"fixed-point\"\nn = 2\n[seed]\npreset = \"constant\"\n",
        "mode = \"fixed-point\"\nm = 7\n[seed]\npreset = \"constant\"\n",
        "mode = \"fixed-point\"\n[seed]\npreset = \"constant\"\np = 2.5\n",
        "mode = \"fixed-point\"\n[seed]\nsigma_norm = 0.1\n",
        "mode = \"check\"\n[seed]\npreset = \"constant\"\n",
        "mode = \"lichnerowicz\"\n[seed]\ntau = \"/nonexistent/tau.cfld\"\n",
    ] {
        let outcome = run(&config(text));
        assert_eq!(outcome.exit_code, EXIT_CONFIG, "{text}: {:?}", outcome.error);
    }
    assert!(RunConfig::from_toml("mode = \"fixed-point\"\nbogus = 1\n").is_err());
    assert!(RunConfig::from_toml("mode = \"nonsense\"\n").is_err());
}

#[test]
fn identical_configs_give_identical_fields() {
    let dirs = [tempfile::tempdir().unwrap(), tempfile::tempdir().unwrap()];
    let mut reports = Vec::new();
    for dir in &dirs {
        let mut cfg = RunConfig::load(&configs("constant.toml")).unwrap();
        cfg.m = 8;
        cfg.stability.probes = 8;
        cfg.stability.sobolev_trials = 8;
        cfg.out = Some(dir.path().to_path_buf());
        let outcome = run(&cfg);
        assert_eq!(outcome.exit_code, EXIT_OK, "{:?}", outcome.error);
        reports.push(outcome.report);
    }
    for name in ["phi.cfld", "w.cfld", "sigma.cfld"] {
        let a = std::fs::read(dirs[0].path().join(name)).unwrap();
        let b = std::fs::read(dirs[1].path().join(name)).unwrap();
        assert_eq!(a, b, "{name}");
    }
    let a = serde_json::to_value(&reports[0].fixed_point).unwrap();
    let b = serde_json::to_value(&reports[1].fixed_point).unwrap();
    assert_eq!(a, b);
}

#[test]
fn written_fields_read_back_bitwise() {
    let dir = tempfile::tempdir().unwrap();
    let mut cfg = config("mode = \"make-tt\"\nm = 8\n[seed]\nparity = false\n");
    cfg.out = Some(dir.path().to_path_buf());
    let outcome = run(&cfg);
    assert_eq!(outcome.exit_code, EXIT_OK, "{:?}", outcome.error);
    let path = dir.path().join("sigma.cfld");
    let bytes = std::fs::read(&path).unwrap();
    let file = FieldFile::read(&path).unwrap();
    assert_eq!((file.n, file.m, file.components.len()), (3, 8, 6));
    let mut again = Vec::new();
    file.to_writer(&mut again).unwrap();
    assert_eq!(bytes, again);
    assert!(outcome.report.failed_checks().is_empty());
}

#[test]
fn binary_writes_report_and_maps_exit_codes() {
    let dir = tempfile::tempdir().unwrap();
    let status = binary()
        .args(["--config", configs("bootstrap.toml").to_str().unwrap(), "--out"])
        .arg(dir.path())
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_OK));
    let report: serde_json::Value =
        serde_json::from_slice(&std::fs::read(dir.path().join("report.json")).unwrap()).unwrap();
    assert_eq!(report["schema_version"], 1);
    assert_eq!(report["mode"], "bootstrap");
    assert_eq!(report["status"]["success"], true);

    let out = binary().args(["--config", configs("bootstrap.toml").to_str().unwrap()]).output().unwrap();
    let printed: serde_json::Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(printed["bootstrap"]["exact"]["p0"], "8");

    let status = binary()
        .args(["--config", configs("bootstrap.toml").to_str().unwrap(), "--mode", "unknown"])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
    let status = binary().args(["--config", "/nonexistent.toml"]).status().unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
    let status = binary()
        .env("CONSTRAINTS_NUM_THREADS", "zero")
        .args(["--config", configs("bootstrap.toml").to_str().unwrap()])
        .status()
        .unwrap();
    assert_eq!(status.code(), Some(EXIT_CONFIG));
}
