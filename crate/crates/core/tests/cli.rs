use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn pfr(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_pfr"))
        .args(args)
        .output()
        .expect("binary runs")
}

/// `group` is predictable from `f2` and `f3`; `f1` is noise.
fn dataset(dir: &Path) -> PathBuf {
    let mut rng = ChaCha8Rng::seed_from_u64(4);
    let mut csv = String::from("f1,f2,f3,group,y\n");
    for _ in 0..300 {
        let s = rng.random::<f64>() < 0.4;
        let f2 = u8::from(s ^ (rng.random::<f64>() < 0.1));
        let f3 = u8::from(s ^ (rng.random::<f64>() < 0.05));
        let f1: f64 = rng.random();
        let y = u8::from(f1 > 0.5);
        csv.push_str(&format!("{f1},{f2},{f3},{},{}\n", if s { "a" } else { "b" }, if y == 1 { "yes" } else { "no" }));
    }
    fs::write(dir.join("d.csv"), csv).unwrap();
    let cfg = dir.join("d.toml");
    fs::write(
        &cfg,
        "path = \"d.csv\"\ntarget_column = \"y\"\npositive_label = \"yes\"\n\n[[sensitive]]\ncolumn = \"group\"\nprivileged_value = \"b\"\n",
    )
    .unwrap();
    cfg
}

fn text(b: &[u8]) -> String {
    String::from_utf8_lossy(b).into_owned()
}

#[test]
fn tau_prints_majority_share() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset(dir.path());
    let out = pfr(&["tau", cfg.to_str().unwrap(), "--sensitive", "group"]);
    assert_eq!(out.status.code(), Some(0));
    let tau: f64 = text(&out.stdout).trim().parse().unwrap();
    assert!(tau > 0.5 && tau < 0.7, "{tau}");
}

#[test]
fn pfr_then_audit() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset(dir.path());
    let trace = dir.path().join("t.jsonl");
    let out = pfr(&[
        "pfr",
        cfg.to_str().unwrap(),
        "--sensitive",
        "group",
        "--tau",
        "0.7",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let lines = fs::read_to_string(&trace).unwrap();
    assert!(lines.lines().count() >= 2);
    assert!(text(&out.stderr).contains("recheck"));

    let audit = pfr(&["audit", cfg.to_str().unwrap(), trace.to_str().unwrap(), "--tau", "0.7"]);
    assert_eq!(audit.status.code(), Some(0), "{}", text(&audit.stdout));
    assert!(text(&audit.stdout).contains("group\t"));
}

#[test]
fn unreachable_tau_exits_with_3_and_keeps_partial_trace() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset(dir.path());
    let trace = dir.path().join("t.jsonl");
    let out = pfr(&[
        "pfr",
        cfg.to_str().unwrap(),
        "--sensitive",
        "group",
        "--tau",
        "0.5001",
        "--out",
        trace.to_str().unwrap(),
    ]);
    assert_eq!(out.status.code(), Some(3), "{}", text(&out.stderr));
    assert_eq!(fs::read_to_string(&trace).unwrap().lines().count(), 2);
}

#[test]
fn config_errors_exit_with_1_before_writing() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset(dir.path());
    let exp = dir.path().join("e.toml");
    fs::write(
        &exp,
        format!(
            "dataset = {:?}\nsensitive_sets = [[\"group\"]]\ntau_grid = [0.8, 0.4]\noutput_dir = \"out\"\n",
            cfg.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = pfr(&["run", exp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(text(&out.stderr).contains("tau_grid[1]"));
    assert!(!dir.path().join("out").exists());

    fs::write(
        &exp,
        "dataset = \"missing.toml\"\nsensitive_sets = [[\"group\"]]\ntau_grid = [0.8]\noutput_dir = \"out\"\n",
    )
    .unwrap();
    let out = pfr(&["run", exp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(1));
    assert!(!dir.path().join("out").exists());

    let out = pfr(&["tau", cfg.to_str().unwrap(), "--sensitive", "nope"]);
    assert_eq!(out.status.code(), Some(1));
}

#[test]
fn run_writes_sweep() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dataset(dir.path());
    let exp = dir.path().join("e.toml");
    fs::write(
        &exp,
        format!(
            "dataset = {:?}\nsensitive_sets = [[\"group\"]]\ntau_grid = [0.9, 0.7]\nseed = 3\noutput_dir = \"out\"\n",
            cfg.to_str().unwrap()
        ),
    )
    .unwrap();
    let out = pfr(&["run", exp.to_str().unwrap()]);
    assert_eq!(out.status.code(), Some(0), "{}", text(&out.stderr));
    let sweep = fs::read_to_string(dir.path().join("out/sweep.csv")).unwrap();
    let lines: Vec<&str> = sweep.lines().collect();
    assert_eq!(lines[0], pfr::experiment::SWEEP_HEADER);
    assert_eq!(lines.len(), 4);
    assert!(lines[1].starts_with("baseline,group,,"));
    for name in ["trace_group_0.7.jsonl", "report_group_0.7.json", "rates_group_0.7.csv", "rates_group_baseline.csv", "timings.csv"] {
        assert!(dir.path().join("out").join(name).is_file(), "{name}");
    }
}
