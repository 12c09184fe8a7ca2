use std::fs;
use std::path::{Path, PathBuf};
use std::process::{Command, Output};

use skate_trace::io::{read_trajectory_csv, TRAJECTORY_COLUMNS};

fn tasks() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../tasks")
}

fn skate(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_skate-trace"))
        .args(args)
        .output()
        .expect("binary runs")
}

fn run_ok(cmd: &str, input: &Path, out: &Path, extra: &[&str]) {
    let mut args = vec![
        cmd,
        "--input",
        input.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ];
    args.extend_from_slice(extra);
    let o = skate(&args);
    assert!(
        o.status.success(),
        "{cmd} failed: {}",
        String::from_utf8_lossy(&o.stderr)
    );
}

fn json(path: &Path) -> serde_json::Value {
    serde_json::from_str(&fs::read_to_string(path).unwrap()).unwrap()
}

#[test]
fn optimize_then_simulate_reproduces_the_arc() {
    let dir = tempfile::tempdir().unwrap();
    let (a, b) = (dir.path().join("a"), dir.path().join("b"));
    let task = tasks().join("arc2.json");
    run_ok("optimize", &task, &a, &[]);
    run_ok("optimize", &task, &b, &[]);
    for f in [
        "arc.csv",
        "forward.csv",
        "backward.csv",
        "arc.svg",
        "optimized.json",
    ] {
        assert_eq!(
            fs::read(a.join(f)).unwrap(),
            fs::read(b.join(f)).unwrap(),
            "{f} differs between runs"
        );
    }

    let summary = json(&a.join("optimized.json"));
    assert!(summary["cost"].as_f64().unwrap() <= 1e-3);
    let mut t = json(&task);
    t["guess"] = summary["params"].clone();
    let replay = dir.path().join("replay.json");
    fs::write(&replay, serde_json::to_string(&t).unwrap()).unwrap();
    let c = dir.path().join("c");
    run_ok("simulate", &replay, &c, &[]);
    assert_eq!(
        fs::read(a.join("arc.csv")).unwrap(),
        fs::read(c.join("arc.csv")).unwrap()
    );

    let text = fs::read_to_string(c.join("arc.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), TRAJECTORY_COLUMNS.join(","));
    let traj = read_trajectory_csv(text.as_bytes()).unwrap();
    assert!(traj.times.windows(2).all(|w| w[0] < w[1]));
    assert!(traj.quasis.last().unwrap().xi2.abs() <= 1e-8);

    let energy = dir.path().join("energy");
    run_ok("energy", &replay, &energy, &[]);
    let text = fs::read_to_string(energy.join("energy.csv")).unwrap();
    assert_eq!(text.lines().next().unwrap(), "t,skate_energy,mass_energy");
    assert_eq!(text.lines().count(), traj.len() + 1);
    assert!(json(&energy.join("energy.json"))["spike"].is_boolean());
}

#[test]
fn failures_leave_no_outputs() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.json");
    fs::write(&bad, r#"{"T": -1, "r": 1.2}"#).unwrap();
    let out = dir.path().join("out");
    let o = skate(&[
        "simulate",
        "--input",
        bad.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(String::from_utf8_lossy(&o.stderr).contains("error"));
    assert!(!out.exists());

    // the long arc cannot reach its target, so optimize reports failure
    let arc1 = tasks().join("arc1.json");
    let o = skate(&[
        "optimize",
        "--input",
        arc1.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
    ]);
    assert!(!o.status.success());
    assert!(!out.exists());

    let arc2 = tasks().join("arc2.json");
    let o = skate(&[
        "simulate",
        "--input",
        arc2.to_str().unwrap(),
        "--out",
        out.to_str().unwrap(),
        "--tol",
        "no_such_key=1",
    ]);
    assert!(!o.status.success());
    assert!(!out.exists());
}

#[test]
fn pattern_renders_both_rings() {
    let dir = tempfile::tempdir().unwrap();
    run_ok("pattern", &tasks().join("flower.json"), dir.path(), &[]);
    let svg = fs::read_to_string(dir.path().join("pattern.svg")).unwrap();
    assert_eq!(svg.matches(r#"<path class="inner""#).count(), 8);
    assert_eq!(svg.matches(r#"<path class="outer""#).count(), 24);
    let summary = json(&dir.path().join("pattern.json"));
    assert!(summary["max_join_gap"].as_f64().unwrap() <= summary["join_tol"].as_f64().unwrap());
    for i in 1..=3 {
        assert!(dir.path().join(format!("arc{i}.csv")).exists());
    }
}

#[test]
fn fit_splits_at_the_cusp() {
    let dir = tempfile::tempdir().unwrap();
    let fit = dir.path().join("fit");
    run_ok(
        "fit",
        &tasks().join("curve.csv"),
        &fit,
        &["--tol", "fit_tol=1e-4"],
    );
    let arcs = json(&fit.join("arcs.json"));
    let segs = arcs["segments"].as_array().unwrap();
    assert_eq!(segs.len(), 2, "spiral and semicircle split at the cusp");
    for s in segs {
        assert!(s["error"].as_f64().unwrap() <= 1e-4);
    }
}
