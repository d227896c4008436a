#![allow(dead_code)]

use std::path::PathBuf;
use std::process::{Command, Output};

pub fn tests_dir() -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests")
}

pub fn fixture(name: &str) -> String {
    tests_dir().join("fixtures").join(name).display().to_string()
}

pub fn run_cli(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_diffunif"))
        .args(args)
        .env_remove("CTMC_THREADS")
        .output()
        .expect("binary runs")
}

pub fn stdout_of(args: &[&str]) -> String {
    let out = run_cli(args);
    assert!(out.status.success(), "{args:?} failed: {}", String::from_utf8_lossy(&out.stderr));
    String::from_utf8(out.stdout).unwrap()
}

/// Commands whose output is pinned by files under `tests/golden`.
pub fn golden_cases() -> Vec<(&'static str, Vec<String>)> {
    let data = fixture("sir_n10.csv");
    let conf = fixture("hmc.conf");
    let owned = |v: &[&str]| v.iter().map(|s| s.to_string()).collect::<Vec<_>>();
    vec![
        (
            "simulate_sir.tsv",
            owned(&["simulate", "sir", "--population", "10", "--alpha", "1", "--beta", "2.5", "--i0", "2", "--t-end", "4", "--runs", "3", "--seed", "7"]),
        ),
        (
            "simulate_pp.tsv",
            owned(&["simulate", "pp", "--alpha", "1", "--beta", "0.1", "--delta", "0.8", "--x-max", "10", "--y-max", "6", "--x0", "5", "--y0", "3", "--t-end", "2", "--seed", "7"]),
        ),
        (
            "solve_sir.tsv",
            owned(&["solve", "sir", "--population", "10", "--alpha", "1", "--beta", "2.5", "--i0", "2", "--times", "0,0.5,1"]),
        ),
        (
            "loglik.tsv",
            owned(&["loglik", "--population", "10", "--alpha", "0.5", "--beta", "1.5", "--data", &data]),
        ),
        ("hmc.jsonl", owned(&["hmc", "--config", &conf, "--data", &data])),
    ]
}

/// Compares against the golden file, or rewrites it when `UPDATE_GOLDEN`
/// is set. Returns a description of the mismatch, if any.
pub fn check_golden(name: &str, args: &[String]) -> Result<(), String> {
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let out = run_cli(&args);
    if !out.status.success() {
        return Err(format!("{name}: exit {:?}: {}", out.status.code(), String::from_utf8_lossy(&out.stderr)));
    }
    let path = tests_dir().join("golden").join(name);
    if std::env::var_os("UPDATE_GOLDEN").is_some() {
        std::fs::write(&path, &out.stdout).unwrap();
        return Ok(());
    }
    let expected = std::fs::read(&path).map_err(|e| format!("{name}: {e}"))?;
    if expected != out.stdout {
        return Err(format!("{name}: output differs from {}", path.display()));
    }
    Ok(())
}
