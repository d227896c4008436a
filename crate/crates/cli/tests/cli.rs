mod common;

#[path = "../../core/tests/common/oracle.rs"]
mod oracle;

use common::{check_golden, fixture, golden_cases, run_cli, stdout_of};

fn value_of(text: &str, key: &str) -> f64 {
    text.lines()
        .find_map(|l| l.strip_prefix(key).and_then(|rest| rest.strip_prefix('\t')))
        .unwrap_or_else(|| panic!("no {key} in {text}"))
        .parse()
        .unwrap()
}

#[test]
fn golden_outputs_are_reproduced() {
    let failures: Vec<String> = golden_cases()
        .iter()
        .filter_map(|(name, args)| check_golden(name, args).err())
        .collect();
    assert!(failures.is_empty(), "{failures:#?}");
}

#[test]
fn repeated_runs_are_byte_identical() {
    for (_, args) in golden_cases() {
        let args: Vec<&str> = args.iter().map(String::as_str).collect();
        assert_eq!(run_cli(&args).stdout, run_cli(&args).stdout, "{args:?}");
    }
}

#[test]
fn loglik_matches_dense_oracle() {
    let out = stdout_of(&["loglik", "--population", "10", "--alpha", "0.5", "--beta", "1.5", "--data", &fixture("sir_n10.csv")]);
    let records = [(0.0, 8, 2), (1.0, 7, 3), (2.0, 5, 4), (4.0, 4, 3), (7.0, 3, 1)];
    let expected = oracle::sir_dense_loglik(10, 0.5, 1.5, &records);
    let got = value_of(&out, "log_likelihood");
    assert!((got - expected).abs() < 1e-8, "{got} vs {expected}");
}

#[test]
fn solve_at_time_zero_is_the_initial_state() {
    let out = stdout_of(&["solve", "sir", "--population", "10", "--alpha", "1", "--beta", "2.5", "--i0", "2", "--times", "0"]);
    assert_eq!(out, "time\tS\tI\tprobability\n0.0000000000000000e0\t8\t2\t1.0000000000000000e0\n");
}

#[test]
fn default_hmc_configuration_keeps_900_samples() {
    let out = stdout_of(&["hmc", "--population", "10", "--data", &fixture("sir_n10.csv"), "--chains", "10", "--len", "100", "--burn-in", "10"]);
    assert_eq!(out.lines().count(), 900);
    assert!(out.lines().all(|l| l.starts_with("{\"chain\":") && !l.contains("null")));
}

#[test]
fn monthly_segments_are_labelled() {
    let dir = tempfile::tempdir().unwrap();
    let data = dir.path().join("two_months.csv");
    std::fs::write(
        &data,
        "date,infected,recovered\n2020-03-28,2,0\n2020-03-30,3,1\n2020-03-31,3,2\n2020-04-01,2,3\n2020-04-03,2,4\n",
    )
    .unwrap();
    let out = stdout_of(&[
        "hmc", "--population", "10", "--data", data.to_str().unwrap(), "--chains", "2", "--len", "12", "--burn-in", "2",
        "--segment-by-month",
    ]);
    let march = out.lines().filter(|l| l.contains("\"segment\":\"2020-03\"")).count();
    let april = out.lines().filter(|l| l.contains("\"segment\":\"2020-04\"")).count();
    assert_eq!((march, april), (20, 20));
}

#[test]
fn simulated_cases_can_be_read_back() {
    let dir = tempfile::tempdir().unwrap();
    let cases = dir.path().join("cases.csv");
    let status = run_cli(&[
        "simulate", "sir", "--population", "50", "--alpha", "0.2", "--beta", "0.6", "--i0", "3", "--t-end", "30",
        "--seed", "5", "--format", "cases", "--out", cases.to_str().unwrap(),
    ])
    .status;
    assert!(status.success());
    let text = std::fs::read_to_string(&cases).unwrap();
    assert_eq!(text.lines().count(), 32);
    assert!(text.starts_with("date,infected,recovered\n2020-03-01,3,0\n"));
    let out = run_cli(&["loglik", "--population", "50", "--alpha", "0.2", "--beta", "0.6", "--data", cases.to_str().unwrap()]);
    assert!(out.status.success(), "{}", String::from_utf8_lossy(&out.stderr));
}

#[test]
fn exit_codes_distinguish_bad_input_from_numerical_failure() {
    let bad = run_cli(&["loglik", "--population", "10", "--alpha", "1", "--beta", "1", "--data", &fixture("malformed.csv")]);
    assert_eq!(bad.status.code(), Some(1));
    assert!(String::from_utf8_lossy(&bad.stderr).contains(":3:"));

    let missing = run_cli(&["loglik", "--population", "10", "--data", &fixture("sir_n10.csv")]);
    assert_eq!(missing.status.code(), Some(1));

    let usage = run_cli(&["solve", "sir", "--nonsense"]);
    assert_eq!(usage.status.code(), Some(1));

    let impossible = run_cli(&["fit", "--population", "10", "--data", &fixture("impossible_n10.csv")]);
    assert_eq!(impossible.status.code(), Some(2), "{}", String::from_utf8_lossy(&impossible.stderr));
}

#[test]
fn flags_override_the_config_file() {
    let conf = fixture("hmc.conf");
    let data = fixture("sir_n10.csv");
    let from_file = stdout_of(&["hmc", "--config", &conf, "--data", &data]);
    assert_eq!(from_file.lines().count(), 2 * 25);
    let overridden = stdout_of(&["hmc", "--config", &conf, "--data", &data, "--len", "10"]);
    assert_eq!(overridden.lines().count(), 2 * 5);
}

#[test]
fn thread_count_does_not_change_results() {
    let data = fixture("sir_n10.csv");
    let args = ["hmc", "--population", "10", "--data", &data, "--chains", "3", "--len", "12", "--burn-in", "2"];
    let single = std::process::Command::new(env!("CARGO_BIN_EXE_diffunif"))
        .args(args)
        .env("CTMC_THREADS", "1")
        .output()
        .unwrap();
    assert!(single.status.success());
    assert_eq!(single.stdout, stdout_of(&args).into_bytes());
}

#[test]
fn fit_recovers_its_own_optimum() {
    let data = fixture("sir_n10.csv");
    let first = stdout_of(&["fit", "--population", "10", "--data", &data]);
    let (a, b) = (value_of(&first, "alpha"), value_of(&first, "beta"));
    let again = stdout_of(&["fit", "--population", "10", "--data", &data, "--alpha", &a.to_string(), "--beta", &b.to_string()]);
    assert!(value_of(&again, "iterations") <= 2.0);
}
