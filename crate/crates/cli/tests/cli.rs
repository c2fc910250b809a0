use std::path::PathBuf;
use std::process::{Command, Output};

use serde_json::Value;

fn data(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data").join(name)
}

fn run(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_interleave"))
        .args(args)
        .env_remove("INTERLEAVE_CAP")
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8_lossy(&o.stdout).into_owned()
}

fn json(args: &[&str]) -> (i32, Value) {
    let mut all = args.to_vec();
    all.push("--json");
    let o = run(&all);
    let v = serde_json::from_slice(&o.stdout).unwrap_or_else(|e| panic!("{e}: {}", stdout(&o)));
    (o.status.code().unwrap(), v)
}

#[test]
fn rr_passes_at_its_own_epsilon() {
    let rr = data("rr.toml");
    let (code, v) = json(&["verify", "approx", rr.to_str().unwrap(), "--eps", "1.0", "--delta", "0"]);
    assert_eq!(code, 0);
    assert_eq!(v["verdict"], "PASS");
    assert_eq!(v["manifest"]["command"], "verify approx");
}

#[test]
fn rr_fails_below_its_epsilon_with_a_witness() {
    let rr = data("rr.toml");
    let (code, v) = json(&["verify", "approx", rr.to_str().unwrap(), "--eps", "0.9", "--delta", "0"]);
    assert_eq!(code, 1);
    assert_eq!(v["verdict"], "FAIL");
    assert_eq!(v["witness_adversary"]["root"]["query"], "q");
    assert_eq!(v["witness_transcripts"][0], "[0] q→0");
}

#[test]
fn rdp_reports_the_worst_divergence() {
    let p = data("two_rounds.toml");
    let (code, v) = json(&["verify", "rdp", p.to_str().unwrap(), "--alpha", "2", "--bound", "1"]);
    assert_eq!(code, 0);
    let achieved = v["achieved"].as_f64().unwrap();
    assert!(achieved > 0.5 && achieved < 1.0, "{achieved}");
}

#[test]
fn cap_exceedance_has_its_own_exit_code() {
    let p = data("two_rounds.toml");
    let o = run(&["verify", "approx", p.to_str().unwrap(), "--eps", "0.5", "--delta", "0", "--cap", "2"]);
    assert_eq!(o.status.code(), Some(3));
    assert!(String::from_utf8_lossy(&o.stderr).contains("too large for exhaustive verification"));
    let o = Command::new(env!("CARGO_BIN_EXE_interleave"))
        .args(["verify", "approx", p.to_str().unwrap(), "--eps", "0.5", "--delta", "0"])
        .env("INTERLEAVE_CAP", "2")
        .output()
        .unwrap();
    assert_eq!(o.status.code(), Some(3));
}

#[test]
fn parse_errors_name_the_file_and_line() {
    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.toml");
    std::fs::write(&bad, "format_version = 1\nqueries = [\"q\"\n").unwrap();
    let o = run(&["verify", "approx", bad.to_str().unwrap(), "--eps", "1", "--delta", "0"]);
    assert_eq!(o.status.code(), Some(2));
    let err = String::from_utf8_lossy(&o.stderr);
    assert!(err.contains("bad.toml") && err.contains("line 2"), "{err}");

    let o = run(&["verify", "approx", "--eps", "1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn unknown_format_version_is_rejected() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("v2.toml");
    let text = std::fs::read_to_string(data("rr.toml")).unwrap().replace("format_version = 1", "format_version = 2");
    std::fs::write(&f, text).unwrap();
    let o = run(&["verify", "approx", f.to_str().unwrap(), "--eps", "1", "--delta", "0"]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("format_version 2"));
}

#[test]
fn decompose_then_simulate_matches_direct_computation() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.toml");
    let (code, v) = json(&[
        "decompose",
        data("approx_rr.toml").to_str().unwrap(),
        "--eps",
        "1",
        "--delta",
        "0.1",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(code, 0, "{v}");
    assert!(v["max_identity_gap"].as_f64().unwrap() <= 1e-9);

    let adv = data("interleaved.adv.toml");
    for b in ["0", "1"] {
        let o = run(&["simulate", out.to_str().unwrap(), out.to_str().unwrap(), adv.to_str().unwrap(), "--b", b]);
        assert_eq!(o.status.code(), Some(0));
        assert!(stdout(&o).contains("max per-transcript gap ≤ 1e-9"), "{}", stdout(&o));
    }
    let (_, v) = json(&["simulate", out.to_str().unwrap(), out.to_str().unwrap(), adv.to_str().unwrap(), "--b", "0"]);
    let mass: f64 = v["transcripts"].as_array().unwrap().iter().map(|r| r["simulated"].as_f64().unwrap()).sum();
    assert!((mass - 1.0).abs() < 1e-12);
}

#[test]
fn decompose_refuses_pairs_that_are_not_indistinguishable() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.toml");
    let o = run(&[
        "decompose",
        data("rr.toml").to_str().unwrap(),
        "--eps",
        "0.5",
        "--delta",
        "0.01",
        "-o",
        out.to_str().unwrap(),
    ]);
    assert_eq!(o.status.code(), Some(1));
    assert!(stdout(&o).contains("control tables"));
    assert!(!out.exists());
}

#[test]
fn adversary_must_cover_reachable_histories() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("d.toml");
    run(&["decompose", data("approx_rr.toml").to_str().unwrap(), "--eps", "1", "--delta", "0.1", "-o", out.to_str().unwrap()]);
    let adv = dir.path().join("partial.toml");
    std::fs::write(&adv, "format_version = 1\nsystems = 1\nrounds = 1\n[root]\nsystem = 0\nquery = \"q\"\n").unwrap();
    let o = run(&["simulate", out.to_str().unwrap(), adv.to_str().unwrap(), "--b", "0"]);
    assert_eq!(o.status.code(), Some(0));
    let o = run(&["simulate", out.to_str().unwrap(), out.to_str().unwrap(), adv.to_str().unwrap(), "--b", "0"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn basic_composition_doubles() {
    let (code, v) = json(&["compose-calc", "basic", "--k", "2", "--eps", "1", "--delta", "0"]);
    assert_eq!(code, 0);
    assert_eq!(v["rows"][0]["eps_prime"], 2.0);
    assert_eq!(v["rows"][0]["delta_prime"], 0.0);
    let o = run(&["compose-calc", "basic", "--k", "2", "--eps", "1", "--delta", "0"]);
    assert!(stdout(&o).lines().nth(1).unwrap().contains(" 2 "));
}

#[test]
fn optimal_is_tighter_than_advanced() {
    let (_, adv) = json(&["compose-calc", "advanced", "--k", "20", "--eps", "0.1", "--delta-slack", "1e-6"]);
    let ep = adv["rows"][0]["eps_prime"].as_f64().unwrap();
    let (_, opt) = json(&["compose-calc", "optimal", "--k", "20", "--eps", "0.1", "--eps-prime", &ep.to_string()]);
    assert!(opt["rows"][0]["delta_prime"].as_f64().unwrap() <= 1e-6);

    let (_, inv) = json(&["compose-calc", "optimal", "--k", "20", "--eps", "0.1", "--delta-prime", "1e-6"]);
    assert!(inv["rows"][0]["eps_prime"].as_f64().unwrap() <= ep);

    let o = run(&["compose-calc", "optimal", "--k", "20", "--eps", "0.1"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn zcdp_budgets_add() {
    let (code, v) = json(&["budget", "compose", data("budgets.json").to_str().unwrap(), "--to-dp", "--delta", "1e-5"]);
    assert_eq!(code, 0);
    assert_eq!(v["composed"]["kind"], "zcdp");
    assert!((v["composed"]["rho"].as_f64().unwrap() - 0.6).abs() < 1e-12);
    let eps = v["approx_dp"]["epsilon"].as_f64().unwrap();
    let expect = 0.6 + 2.0 * (0.6f64 * (1e5f64).ln()).sqrt();
    assert!((eps - expect).abs() < 1e-12);
}

#[test]
fn mixed_budgets_are_a_usage_error() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("mixed.json");
    std::fs::write(&f, r#"[{"kind":"zcdp","rho":0.1},{"kind":"rdp","alpha":2,"epsilon":0.1}]"#).unwrap();
    let o = run(&["budget", "compose", f.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
}

fn audit_args(extra: &[&str]) -> Vec<String> {
    let mut v: Vec<String> = ["audit", "guess-check"]
        .into_iter()
        .map(String::from)
        .chain(["people.csv", "people_neighbor.csv", "queries.json"].map(|f| data(f).display().to_string()))
        .collect();
    v.extend(extra.iter().map(|s| s.to_string()));
    v
}

#[test]
fn audit_is_reproducible_and_consistent() {
    let args = audit_args(&["--eps", "0.5", "--c", "2", "--tol", "3", "--runs", "4000", "--seed", "3"]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, a) = json(&args);
    let (_, b) = json(&args);
    assert_eq!(code, 0);
    assert_eq!(a["verdict"], "CONSISTENT");
    assert_eq!(a["manifest"]["seed"], 3);
    let strip = |mut v: Value| {
        v["manifest"]["elapsed_ms"] = Value::Null;
        v
    };
    assert_eq!(strip(a), strip(b));
}

#[test]
fn audit_flags_the_broken_variant() {
    let args = audit_args(&[
        "--eps",
        "0.9",
        "--c",
        "1",
        "--tol",
        "3",
        "--runs",
        "20000",
        "--seed",
        "1",
        "--claim",
        "0.5",
        "--no-threshold-noise",
    ]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    let (code, v) = json(&args);
    assert_eq!(code, 1);
    assert_eq!(v["verdict"], "INCONSISTENT");
}

#[test]
fn audit_needs_enough_runs() {
    let args = audit_args(&["--eps", "0.5", "--c", "2", "--tol", "3", "--runs", "5"]);
    let args: Vec<&str> = args.iter().map(String::as_str).collect();
    assert_eq!(run(&args).status.code(), Some(2));
}

#[test]
fn fixtures_round_trip_through_verify() {
    let dir = tempfile::tempdir().unwrap();
    let f = dir.path().join("fx.toml");
    let gen = |seed: &str| {
        run(&["fixtures", "gen", "--depth", "2", "--nx", "2", "--ny", "3", "--seed", seed, "-o", f.to_str().unwrap()]);
        std::fs::read_to_string(&f).unwrap()
    };
    let a = gen("9");
    assert_eq!(a, gen("9"));
    assert_ne!(a, gen("10"));
    let o = run(&["verify", "approx", f.to_str().unwrap(), "--eps", "20", "--delta", "0"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
}

#[test]
fn jobs_flag_does_not_change_results() {
    let p = data("two_rounds.toml");
    let (_, a) = json(&["verify", "approx", p.to_str().unwrap(), "--eps", "0.1", "--delta", "0", "--jobs", "1"]);
    let (_, b) = json(&["verify", "approx", p.to_str().unwrap(), "--eps", "0.1", "--delta", "0", "--jobs", "3"]);
    assert_eq!(a["achieved"], b["achieved"]);
    assert_eq!(a["witness_adversary"], b["witness_adversary"]);
}
