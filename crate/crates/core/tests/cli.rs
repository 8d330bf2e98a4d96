use std::path::{Path, PathBuf};
use std::process::Command as Proc;
use vwlab::cli::{execute, Command, ExperimentConfig, EXIT_ERROR, EXIT_FAIL, EXIT_PASS};

fn bin() -> &'static str {
    env!("CARGO_BIN_EXE_vwlab")
}

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("configs")
}

fn run_bin(args: &[&str]) -> (i32, String, String) {
    let o = Proc::new(bin()).args(args).output().expect("spawn vwlab");
    (
        o.status.code().unwrap_or(-1),
        String::from_utf8_lossy(&o.stdout).into_owned(),
        String::from_utf8_lossy(&o.stderr).into_owned(),
    )
}

#[test]
fn bundled_configs_parse_and_name_a_command() {
    let mut n = 0;
    for entry in std::fs::read_dir(configs()).unwrap() {
        let p = entry.unwrap().path();
        let c = ExperimentConfig::load(&p).unwrap_or_else(|e| panic!("{}: {e}", p.display()));
        let cmd = c
            .command
            .unwrap_or_else(|| panic!("{} has no command", p.display()));
        c.resolved(cmd).unwrap();
        n += 1;
    }
    assert!(n >= 10);
}

#[test]
fn unknown_key_is_named() {
    let err = ExperimentConfig::parse_toml("[consistency]\ntemplat = \"regular\"\n").unwrap_err();
    assert!(err.to_string().contains("templat"), "{err}");
    let err = ExperimentConfig::parse_json(r#"{"solve": {"record": {"nodes": []}}}"#).unwrap_err();
    assert!(err.to_string().contains("nodes"), "{err}");
    let err = ExperimentConfig::parse_toml("format_version = 7\n").unwrap_err();
    assert!(err.to_string().contains("format_version"), "{err}");
}

#[test]
fn inline_template_errors_name_the_key() {
    let text = "[solve.template]\nname = \"x\"\ng = { kind = \"heaviside\", center = 0.0 }\nt_finl = 1.0\n";
    let err = ExperimentConfig::parse_toml(text).unwrap_err();
    assert!(err.to_string().contains("t_finl"), "{err}");
}

#[test]
fn malformed_config_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("bad.toml");
    std::fs::write(&p, "command = \"solve\"\n[solve]\nbogus = 1\n").unwrap();
    let (code, _, err) = run_bin(&[
        "run",
        "--config",
        p.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("bogus"), "{err}");
}

#[test]
fn unknown_template_exits_1() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path().join("t.toml");
    std::fs::write(&p, "[solve]\ntemplate = \"nope\"\n").unwrap();
    let (code, _, err) = run_bin(&[
        "solve",
        "--config",
        p.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_ERROR);
    assert!(err.contains("nope"), "{err}");
}

#[test]
fn consistency_config_exits_0() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("consistency.toml");
    let (code, out, _) = run_bin(&[
        "consistency",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--jobs",
        "2",
    ]);
    assert_eq!(code, EXIT_PASS, "{out}");
    for f in ["consistency.json", "consistency.csv", "metadata.json"] {
        assert!(dir.path().join(f).exists(), "{f}");
    }
    let report: serde_json::Value = serde_json::from_str(
        &std::fs::read_to_string(dir.path().join("consistency.json")).unwrap(),
    )
    .unwrap();
    // resolved config inline, bundled template expanded
    assert_eq!(
        report["config"]["consistency"]["template"]["name"],
        "regular"
    );
    assert_eq!(report["pass"], true);
}

#[test]
fn zero_order_perturbation_exits_2_indeterminate() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("uniqueness_q0.toml");
    let (code, out, _) = run_bin(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
    ]);
    assert_eq!(code, EXIT_FAIL, "{out}");
    assert!(out.contains("indeterminate"), "{out}");
}

#[test]
fn format_flag_selects_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = configs().join("conjugation.toml");
    let (code, _, _) = run_bin(&[
        "conjugate-check",
        "--config",
        cfg.to_str().unwrap(),
        "--out",
        dir.path().to_str().unwrap(),
        "--format",
        "csv",
    ]);
    assert_eq!(code, EXIT_PASS);
    assert!(dir.path().join("conjugate-check.csv").exists());
    assert!(!dir.path().join("conjugate-check.json").exists());
}

#[test]
fn reports_are_deterministic_across_job_counts() {
    let cfg = ExperimentConfig::load(&configs().join("uniqueness.toml")).unwrap();
    let a = vwlab::cli::execute_with_jobs(&cfg, Command::Uniqueness, Some(1)).unwrap();
    let b = vwlab::cli::execute_with_jobs(&cfg, Command::Uniqueness, Some(4)).unwrap();
    assert_eq!(
        serde_json::to_string_pretty(&a.report).unwrap(),
        serde_json::to_string_pretty(&b.report).unwrap()
    );
    assert_eq!(a.csv, b.csv);
}

#[test]
fn solve_writes_binary_snapshots() {
    let mut cfg = ExperimentConfig::load(&configs().join("solve_validation.toml")).unwrap();
    cfg.solve.as_mut().unwrap().validation = None;
    let o = execute(&cfg, Command::Solve).unwrap();
    assert!(o.pass);
    let (name, bytes) = &o.files[0];
    assert_eq!(name, "snapshot_0.bin");
    let f = vwlab::grid_field::Field::from_binary(bytes).unwrap();
    assert_eq!(f.grid.points, 2048);
}

#[test]
fn defaults_run_without_a_config_section() {
    let o = execute(&ExperimentConfig::new(), Command::PsidoProbe).unwrap();
    assert!(o.pass, "{:?}", o.summary);
    assert_eq!(o.report["result"].as_array().unwrap().len(), 6);
}
