use std::fs;
use std::path::Path;
use std::process::{Command, Output};

use serde_json::Value;

fn memchan(dir: &Path, args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_memchan"))
        .current_dir(dir)
        .env_remove("MEMCHAN_JOBS")
        .args(args)
        .output()
        .expect("binary runs")
}

fn rows(csv: &str) -> Vec<Vec<String>> {
    csv.lines()
        .skip(1)
        .filter(|l| !l.starts_with('#'))
        .map(|l| l.split(',').map(str::to_string).collect())
        .collect()
}

fn footer(csv: &str, key: &str) -> Option<String> {
    csv.lines()
        .filter_map(|l| l.strip_prefix("# "))
        .find_map(|l| l.strip_prefix(&format!("{key}=")).map(str::to_string))
}

fn meta(dir: &Path, stem: &str) -> Value {
    serde_json::from_str(&fs::read_to_string(dir.join(format!("{stem}.meta.json"))).unwrap()).unwrap()
}

#[test]
fn markov_binary_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    fs::write(dir.path().join("cfg.json"), r#"{"matrix": [[0.9, 0.1], [0.1, 0.9]]}"#).unwrap();
    let out = memchan(dir.path(), &["markov", "--config", "cfg.json", "--out", "q.csv"]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
    let csv = fs::read_to_string(dir.path().join("q.csv")).unwrap();
    let r = rows(&csv);
    assert_eq!(r.len(), 1);
    let cap: f64 = r[0][2].parse().unwrap();
    assert!((cap - 0.5310044064107188).abs() < 1e-9);
    let m = meta(dir.path(), "q");
    assert_eq!(m["subcommand"], "markov");
    assert_eq!(m["config_hash"].as_str().unwrap().len(), 64);
}

#[test]
fn wolf_sweep_is_symmetric() {
    let dir = tempfile::tempdir().unwrap();
    let out = memchan(dir.path(), &["wolf-sweep", "--g", "-2:2:0.05", "--out", "wolf.csv"]);
    assert!(out.status.success());
    let r = rows(&fs::read_to_string(dir.path().join("wolf.csv")).unwrap());
    assert_eq!(r.len(), 81);
    let caps: Vec<f64> = r.iter().map(|row| row[2].parse().unwrap()).collect();
    assert_eq!(caps[40], 1.0);
    assert_eq!(r[40][0].parse::<f64>().unwrap(), 0.0);
    for k in 0..81 {
        assert!((caps[k] - caps[80 - k]).abs() < 1e-12);
    }
}

#[test]
fn qising_sweep_schema() {
    let dir = tempfile::tempdir().unwrap();
    let out = memchan(dir.path(), &["qising-sweep", "--n", "6,8", "--g", "0.2:1.8:0.4", "--out", "qi.csv"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("qi.csv")).unwrap();
    assert!(csv.starts_with(
        "n,g,capacity_bits,diag_entropy_bits,energy,gap_estimate,degenerate,residual,status\n"
    ));
    let r = rows(&csv);
    assert_eq!(r.len(), 10);
    assert!(r.iter().all(|row| row[8] == "ok"));
    assert!(footer(&csv, "max_abs_slope_n8").is_some());
    assert_eq!(meta(dir.path(), "qi")["config"]["seed"], 42);
}

#[test]
fn outputs_are_byte_reproducible() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let run = |jobs: &str, name: &str| {
        let out = memchan(p, &["qising-sweep", "--n", "6", "--g", "0.5:1.5:0.25", "--jobs", jobs, "--out", name]);
        assert!(out.status.success());
        fs::read(p.join(name)).unwrap()
    };
    let a = run("1", "a.csv");
    let b = run("1", "b.csv");
    let c = run("3", "c.csv");
    assert_eq!(a, b);
    assert_eq!(a, c);
    for args in [
        vec!["conditions-mps"],
        vec!["gaussian-decay"],
        vec!["mps-capacity", "--n", "6:9"],
    ] {
        let cfg = r#"{"environment": {"rank1": {"a": 0.7, "b": 0.4, "c": 0.3}}}"#;
        fs::write(p.join("env.json"), cfg).unwrap();
        let mut first = args.clone();
        if args[0] == "mps-capacity" {
            first.extend(["--config", "env.json"]);
        }
        let mut second = first.clone();
        first.extend(["--out", "x.csv"]);
        second.extend(["--out", "y.csv", "--jobs", "2"]);
        assert!(memchan(p, &first).status.success());
        assert!(memchan(p, &second).status.success());
        assert_eq!(fs::read(p.join("x.csv")).unwrap(), fs::read(p.join("y.csv")).unwrap(), "{args:?}");
        assert_eq!(meta(p, "x")["config_hash"], meta(p, "y")["config_hash"]);
    }
}

#[test]
fn config_hash_follows_content() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    let hash = |g: &str, name: &str| {
        assert!(memchan(p, &["wolf-sweep", "--g", g, "--out", name]).status.success());
        meta(p, name.trim_end_matches(".csv"))["config_hash"].as_str().unwrap().to_string()
    };
    let a = hash("0:1:0.5", "a.csv");
    let b = hash("0,0.5,1", "b.csv");
    let c = hash("0:1:0.25", "c.csv");
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn config_errors_exit_one() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("typo.json"), "{\n  \"matrix\": [[1]],\n  \"matrx\": 2\n}").unwrap();
    let out = memchan(p, &["markov", "--config", "typo.json"]);
    assert_eq!(out.status.code(), Some(1));
    let err = String::from_utf8_lossy(&out.stderr);
    assert!(err.contains("matrx") && err.contains("line 3"), "{err}");
    assert_eq!(memchan(p, &["markov"]).status.code(), Some(1));
    assert_eq!(memchan(p, &["markov", "--config", "missing.json"]).status.code(), Some(1));
    assert_eq!(memchan(p, &["no-such-command"]).status.code(), Some(1));
    assert_eq!(memchan(p, &["wolf-sweep", "--g", "1:0:0.1"]).status.code(), Some(1));
    assert_eq!(memchan(p, &["conditions-gaussian", "--kappa", "-0.3"]).status.code(), Some(1));
    fs::write(p.join("two.json"), r#"{"environment": {"wolf": {"g": 0.5}, "rank1": {"a": 1, "b": 1, "c": 1}}}"#).unwrap();
    assert_eq!(memchan(p, &["mps-capacity", "--config", "two.json"]).status.code(), Some(1));
    assert!(memchan(p, &["--help"]).status.success());
}

#[test]
fn numeric_failures_respect_strict() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("h.json"), r#"{"environment": {"wolf": {"g": 0.5}}, "n": [4, 21]}"#).unwrap();
    let out = memchan(p, &["hashing", "--config", "h.json", "--out", "h.csv"]);
    assert_eq!(out.status.code(), Some(0));
    assert!(String::from_utf8_lossy(&out.stderr).contains("warning"));
    let r = rows(&fs::read_to_string(p.join("h.csv")).unwrap());
    assert_eq!(r[0][4], "ok");
    assert!(r[1][4].starts_with("error"));
    assert_eq!(meta(p, "h")["warnings"].as_array().unwrap().len(), 1);
    let out = memchan(p, &["hashing", "--config", "h.json", "--out", "h.csv", "--strict"]);
    assert_eq!(out.status.code(), Some(2));
}

#[test]
fn jobs_environment_override_and_plot() {
    let dir = tempfile::tempdir().unwrap();
    let out = Command::new(env!("CARGO_BIN_EXE_memchan"))
        .current_dir(dir.path())
        .env("MEMCHAN_JOBS", "3")
        .args(["wolf-sweep", "--g", "0:1:0.5", "--jobs", "1", "--out", "w.csv", "--plot", "w.gp"])
        .output()
        .unwrap();
    assert!(out.status.success());
    assert_eq!(meta(dir.path(), "w")["jobs"], 3);
    let script = fs::read_to_string(dir.path().join("w.gp")).unwrap();
    assert!(script.contains("'w.csv' using 1:3"));
}

#[test]
fn conditions_reports() {
    let dir = tempfile::tempdir().unwrap();
    let out = memchan(dir.path(), &["conditions-mps", "--out", "c.csv"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("c.csv")).unwrap();
    assert_eq!(footer(&csv, "decayrepeat_verdict").unwrap(), "decay_confirmed");
    let m = meta(dir.path(), "c");
    let reports = m["details"]["reports"].as_array().unwrap();
    assert_eq!(reports.len(), 2);
    assert!(!reports[0]["samples"].as_array().unwrap().is_empty());

    let out = memchan(dir.path(), &["conditions-gaussian", "--kappa", "0", "--out", "g.csv"]);
    assert!(out.status.success());
    let csv = fs::read_to_string(dir.path().join("g.csv")).unwrap();
    assert_eq!(footer(&csv, "decayrepeat_verdict").unwrap(), "decay_confirmed");
    assert_eq!(footer(&csv, "longshort_verdict").unwrap(), "decay_confirmed");
}

#[test]
fn remaining_subcommands_run() {
    let dir = tempfile::tempdir().unwrap();
    let p = dir.path();
    fs::write(p.join("i.json"), r#"{"beta": 1.0, "J": 1.0}"#).unwrap();
    let out = memchan(p, &["ising", "--config", "i.json"]);
    let csv = String::from_utf8(out.stdout).unwrap();
    let cap: f64 = rows(&csv)[0][5].parse().unwrap();
    assert!((cap - 0.4729346589968384).abs() < 1e-9);

    fs::write(p.join("r.json"), r#"{"a": 0.5, "b": 1.0, "c": [0.0, 1.0]}"#).unwrap();
    let csv = String::from_utf8(memchan(p, &["mps-rank1", "--config", "r.json"]).stdout).unwrap();
    let r = rows(&csv);
    assert_eq!(r[0][7].parse::<f64>().unwrap(), 1.0);

    let csv = String::from_utf8(memchan(p, &["gaussian-longshort"]).stdout).unwrap();
    assert!(footer(&csv, "rate").unwrap().parse::<f64>().unwrap() < 0.0);

    fs::write(p.join("m.json"), r#"{"environment": {"wolf": {"g": 0.5}}}"#).unwrap();
    let csv = String::from_utf8(memchan(p, &["mps-capacity", "--config", "m.json"]).stdout).unwrap();
    let cap: f64 = footer(&csv, "capacity_bits").unwrap().parse().unwrap();
    let exact: f64 = footer(&csv, "capacity_rank1_bits").unwrap().parse().unwrap();
    assert!((cap - exact).abs() < 1e-9);
}
