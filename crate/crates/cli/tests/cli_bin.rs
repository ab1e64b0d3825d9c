//! End-to-end tests of the installed binary: exit codes, emitted files,
//! manifest re-execution, list/report output.

use std::fs;
use std::path::PathBuf;
use std::process::{Command, Output};

const BIN: &str = env!("CARGO_BIN_EXE_mildns");

const QUICK: &str = r#"
[grid]
shape = [16, 16]

[physics]
mu = 0.05

[lp]
p = 6.0

[time]
T = 0.02
dt = 0.005

[initial]
preset = "taylor_green"
amplitude = 0.01
"#;

fn scratch(tag: &str) -> PathBuf {
    let dir = std::env::temp_dir()
        .join("mildns-bin-tests")
        .join(format!("{}-{}", tag, std::process::id()));
    let _ = fs::remove_dir_all(&dir);
    fs::create_dir_all(&dir).unwrap();
    dir
}

fn run(args: &[&str]) -> Output {
    Command::new(BIN).args(args).output().unwrap()
}

fn stderr_of(out: &Output) -> String {
    String::from_utf8_lossy(&out.stderr).into_owned()
}

#[test]
fn run_emits_artifacts_and_reexecutes_identically() {
    let dir = scratch("roundtrip");
    let cfg = dir.join("run.toml");
    fs::write(&cfg, QUICK).unwrap();
    let out1 = dir.join("first");
    let res = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out1.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr_of(&res));
    for name in ["series.csv", "report.json", "u_final.snap", "a_final.snap", "manifest.json"] {
        assert!(out1.join(name).exists(), "missing {name}");
    }

    let out2 = dir.join("second");
    let res = run(&[
        "run",
        "--manifest",
        out1.join("manifest.json").to_str().unwrap(),
        "--out",
        out2.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr_of(&res));
    for name in ["series.csv", "report.json", "u_final.snap", "a_final.snap"] {
        let a = fs::read(out1.join(name)).unwrap();
        let b = fs::read(out2.join(name)).unwrap();
        assert_eq!(a, b, "{name} differs under re-execution");
    }
}

#[test]
fn integrability_violation_exits_with_config_code() {
    let dir = scratch("bad-p");
    let cfg = dir.join("run.toml");
    fs::write(&cfg, QUICK.replace("p = 6.0", "p = 8.0")).unwrap();
    let res = run(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2), "{}", stderr_of(&res));
    assert!(
        stderr_of(&res).contains("integrability hypothesis requires"),
        "stderr: {}",
        stderr_of(&res)
    );
}

#[test]
fn unknown_key_exits_with_config_code() {
    let dir = scratch("typo");
    let cfg = dir.join("run.toml");
    fs::write(&cfg, format!("{QUICK}\n[picard]\nmax_levls = 3\n")).unwrap();
    let res = run(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(2), "{}", stderr_of(&res));
}

#[test]
fn hopeless_window_exits_with_numerical_code() {
    let dir = scratch("window");
    let cfg = dir.join("run.toml");
    let text = format!(
        "{}\n[picard]\nwindow = \"auto\"\n",
        QUICK.replace("amplitude = 0.01", "amplitude = 1e6")
    );
    fs::write(&cfg, text).unwrap();
    let res = run(&["run", "--config", cfg.to_str().unwrap(), "--out", dir.to_str().unwrap()]);
    assert_eq!(res.status.code(), Some(3), "{}", stderr_of(&res));
}

#[test]
fn verify_list_names_every_gate() {
    let res = run(&["verify", "--list"]);
    assert!(res.status.success());
    let stdout = String::from_utf8_lossy(&res.stdout).into_owned();
    for name in mildns_cli::checks::GATE_NAMES {
        assert!(stdout.contains(name), "missing {name}");
    }
}

#[test]
fn report_lists_finished_runs() {
    let dir = scratch("report");
    let cfg = dir.join("run.toml");
    fs::write(&cfg, QUICK).unwrap();
    let out = dir.join("out");
    let res = run(&["run", "--config", cfg.to_str().unwrap(), "--out", out.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr_of(&res));
    let res = run(&["report", "--dir", dir.to_str().unwrap()]);
    assert!(res.status.success(), "{}", stderr_of(&res));
    let stdout = String::from_utf8_lossy(&res.stdout).into_owned();
    assert!(stdout.contains("16x16"), "report output: {stdout}");
}

#[test]
fn set_overrides_reach_the_manifest() {
    let dir = scratch("override");
    let cfg = dir.join("run.toml");
    fs::write(&cfg, QUICK).unwrap();
    let out = dir.join("out");
    let res = run(&[
        "run",
        "--config",
        cfg.to_str().unwrap(),
        "--set",
        "time.dt=0.01",
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(res.status.success(), "{}", stderr_of(&res));
    let manifest = fs::read_to_string(out.join("manifest.json")).unwrap();
    assert!(manifest.contains("dt = 0.01"), "override missing from manifest");
}
