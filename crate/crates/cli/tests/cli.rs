use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn shl(args: &[&str], out: &Path) -> Output {
    Command::new(env!("CARGO_BIN_EXE_shl"))
        .args(args)
        .arg("--out")
        .arg(out)
        .output()
        .expect("binary runs")
}

fn report(out: &Path, command: &str) -> Value {
    let text = fs::read_to_string(out.join(format!("{command}_report.json"))).unwrap();
    serde_json::from_str(&text).unwrap()
}

fn check<'a>(report: &'a Value, prefix: &str) -> &'a Value {
    report["checks"]
        .as_array()
        .unwrap()
        .iter()
        .find(|c| c["name"].as_str().unwrap().starts_with(prefix))
        .unwrap_or_else(|| panic!("no check named {prefix}"))
}

#[test]
fn golden_tightness() {
    let dir = tempfile::tempdir().unwrap();
    let out = shl(&["tightness", "--L", "1", "--h", "0.1", "--N", "2", "--q", "2", "--v", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "tightness");
    assert_eq!(r["command"], "tightness");
    assert_eq!(r["seed"], 0);
    let c = check(&r, "tightness");
    assert!((c["lhs"].as_f64().unwrap() - 2.762431).abs() < 1e-6);
    assert!((c["rhs"].as_f64().unwrap() - 2.762431).abs() < 1e-6);
    assert_eq!(c["pass"], true);
    for key in ["name", "lhs", "rhs", "margin", "pass"] {
        assert!(c.get(key).is_some(), "missing {key}");
    }
    let csv = fs::read_to_string(dir.path().join("tightness.csv")).unwrap();
    assert!(csv.starts_with("L,h,N,q,v,exact,bound,rel_error\n"));
    // stdout carries the same report
    let stdout: Value = serde_json::from_slice(&out.stdout).unwrap();
    assert_eq!(stdout, r);
}

#[test]
fn golden_schedule() {
    let dir = tempfile::tempdir().unwrap();
    let out = shl(&["schedule", "--c1", "1", "--c2", "2", "--N", "2"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let csv = fs::read_to_string(dir.path().join("schedule.csv")).unwrap();
    let values: Vec<f64> = csv.lines().skip(1).map(|l| l.split(',').nth(1).unwrap().parse().unwrap()).collect();
    assert_eq!(values.len(), 3);
    for (v, want) in values.iter().zip([0.0, 0.4, 1.0]) {
        assert!((v - want).abs() < 1e-12, "{values:?}");
    }
    let r = report(dir.path(), "schedule");
    assert!((check(&r, "cost")["rhs"].as_f64().unwrap() - 3.2).abs() < 1e-12);
}

#[test]
fn golden_fpverify_is_tight() {
    let dir = tempfile::tempdir().unwrap();
    let out = shl(
        &["fpverify", "--potential", "x^2/2", "--beta", "1", "--t", "1", "--v", "0.5", "--q", "1"],
        dir.path(),
    );
    assert_eq!(out.status.code(), Some(0), "{}", String::from_utf8_lossy(&out.stderr));
    let r = report(dir.path(), "fpverify");
    let c = check(&r, "SRT_q");
    let (lhs, rhs) = (c["lhs"].as_f64().unwrap(), c["rhs"].as_f64().unwrap());
    assert!((lhs - 0.1446).abs() < 1e-4 && (rhs - 0.1446).abs() < 1e-4, "{lhs} {rhs}");
    assert!(dir.path().join("density.csv").exists());
}

#[test]
fn reports_are_byte_identical_across_runs() {
    let cases: [&[&str]; 3] = [
        &["score", "--d", "2", "--n", "5000", "--deltas", "0.5", "--seed", "7"],
        &["coupling", "--instances", "10", "--convexity", "3", "--seed", "3"],
        &["dualsd", "--random", "12", "--seed", "11"],
    ];
    for args in cases {
        let a = tempfile::tempdir().unwrap();
        let b = tempfile::tempdir().unwrap();
        assert_eq!(shl(args, a.path()).status.code(), Some(0), "{args:?}");
        let b_out = Command::new(env!("CARGO_BIN_EXE_shl"))
            .args(args)
            .arg("--out")
            .arg(b.path())
            .env("SHL_THREADS", "1")
            .output()
            .unwrap();
        assert_eq!(b_out.status.code(), Some(0));
        let name = format!("{}_report.json", args[0]);
        assert_eq!(fs::read(a.path().join(&name)).unwrap(), fs::read(b.path().join(&name)).unwrap(), "{args:?}");
    }
}

#[test]
fn config_file_is_merged_and_flags_win() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("run.cfg");
    fs::write(&cfg, "# sweep\nL = 1\nh = 0.1\nN = 1,2\nq = 2\nv = 3\nseed = 5\n").unwrap();
    let out = shl(&["tightness", "--config", cfg.to_str().unwrap(), "--v", "1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
    let r = report(dir.path(), "tightness");
    assert_eq!(r["params"]["v"], "1");
    assert_eq!(r["params"]["N"], "1,2");
    assert_eq!(r["seed"], 5);
    assert_eq!(r["checks"].as_array().unwrap().len(), 2);
}

#[test]
fn invalid_configuration_exits_two() {
    let dir = tempfile::tempdir().unwrap();
    let cfg = dir.path().join("bad.cfg");
    fs::write(&cfg, "L = 1\nwhatever = 3\n").unwrap();
    let cases: Vec<Vec<&str>> = vec![
        vec!["tightness", "--h", "abc"],
        vec!["tightness", "--config", cfg.to_str().unwrap()],
        vec!["tightness", "--q", "0.5"],
        vec!["schedule", "--c1", "1"],
        vec!["fpverify", "--potential", "x^2", "--beta", "1"],
        vec!["fpverify", "--potential", "x^"],
        vec!["bounds-table", "--kind", "nope"],
        vec!["score", "--n", "50"],
        vec!["nonexistent"],
    ];
    for args in cases {
        let out = shl(&args, dir.path());
        assert_eq!(out.status.code(), Some(2), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
        assert!(!out.stderr.is_empty());
    }
}

#[test]
fn failed_verification_exits_one_with_instances() {
    let dir = tempfile::tempdir().unwrap();
    let out = shl(&["tightness", "--lambda", "1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let failures: Value = serde_json::from_str(&fs::read_to_string(dir.path().join("tightness_failures.json")).unwrap()).unwrap();
    assert_eq!(failures[0]["instance"]["lipschitz"], 1.0);
    assert_eq!(failures[0]["check"]["pass"], false);

    let out = shl(&["schedule", "--c1", "1", "--c2", "2", "--N", "2", "--candidate", "0,0.5,1"], dir.path());
    assert_eq!(out.status.code(), Some(1));
    let out = shl(&["schedule", "--c1", "1", "--c2", "2", "--N", "2", "--candidate", "0,0.4,1"], dir.path());
    assert_eq!(out.status.code(), Some(0));
}

#[test]
fn other_commands_pass_by_default() {
    let dir = tempfile::tempdir().unwrap();
    let cases: [&[&str]; 5] = [
        &["bounds-table", "--t", "0.5,1,inf", "--order", "1.5,2,4"],
        &["schedule", "--L", "1", "--T", "1"],
        &["dualsd"],
        &["coupling", "--instances", "10", "--convexity", "4"],
        &["fpverify", "--potential", "x^2/2 + 0.2*sin(x)", "--mode", "all"],
    ];
    for args in cases {
        let out = shl(args, dir.path());
        assert_eq!(out.status.code(), Some(0), "{args:?}: {}", String::from_utf8_lossy(&out.stderr));
    }
    let dualsd = report(dir.path(), "dualsd");
    let c = check(&dualsd, "convolution");
    assert!((c["lhs"].as_f64().unwrap() - 1.125).abs() < 1e-12);
    assert!((c["rhs"].as_f64().unwrap() - 1.625).abs() < 1e-12);
    let bounds = fs::read_to_string(dir.path().join("bounds.csv")).unwrap();
    assert!(bounds.contains("SRT_q,1,1,2,1,1.1565176427496657"));
    assert!(bounds.contains("SRT_1,1,1,,1,0.5782588213748329"));
}

#[test]
fn help_exits_zero() {
    let out = Command::new(env!("CARGO_BIN_EXE_shl")).arg("--help").output().unwrap();
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stdout).contains("bounds-table"));
}
