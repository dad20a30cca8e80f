use std::path::PathBuf;
use std::process::{Command, Output};

use sdu_core::scenario::Scenario;

fn sdu(args: &[&str]) -> Output {
    Command::new(env!("CARGO_BIN_EXE_sdu"))
        .args(args)
        .current_dir(env!("CARGO_MANIFEST_DIR"))
        .output()
        .expect("binary runs")
}

fn stdout(o: &Output) -> String {
    String::from_utf8(o.stdout.clone()).expect("utf-8")
}

fn scenario(name: &str) -> PathBuf {
    PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("scenarios").join(name)
}

#[test]
fn no_arguments_prints_usage_and_exits_2() {
    let o = sdu(&[]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("Usage"));
}

#[test]
fn unknown_subcommand_exits_2() {
    let o = sdu(&["frobnicate"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn villa_cash_against_villa_at_t2() {
    let o = sdu(&[
        "compare", "--scenario", "scenarios/villa.sdu", "--g", "cash", "--f", "villa_t2", "--s", "0", "--t", "2",
    ]);
    assert_eq!(o.status.code(), Some(0));
    assert_eq!(stdout(&o), "PRECEQ\n");
}

#[test]
fn compare_tsv_lists_the_partition() {
    let o = sdu(&[
        "compare", "--scenario", "scenarios/villa.sdu", "--g", "cash_t1", "--f", "villa_t2", "--format", "tsv",
    ]);
    assert_eq!(stdout(&o), "MIXED\t{}\t{A}\t{AcD, AcDc}\n");
}

#[test]
fn cce_of_the_villa_at_t1() {
    let o = sdu(&["cce", "--scenario", "scenarios/villa.sdu", "--f", "villa_t1", "--format", "tsv"]);
    assert_eq!(o.status.code(), Some(0));
    let line = stdout(&o);
    let value: f64 = line.trim().split('\t').nth(1).unwrap().parse().unwrap();
    assert!((value - 1e6).abs() < 1e-6);
}

#[test]
fn semigroup_on_the_random_scenario() {
    let o = sdu(&["semigroup", "--scenario", "scenarios/random8.sdu"]);
    assert_eq!(o.status.code(), Some(0));
    let out = stdout(&o);
    let line = out.lines().find(|l| l.starts_with("max residual")).unwrap();
    let r: f64 = line.rsplit(' ').next().unwrap().parse().unwrap();
    assert!(r <= 1e-8, "{out}");
}

#[test]
fn output_is_deterministic_for_a_seed() {
    let args = ["semigroup", "--scenario", "scenarios/random8.sdu", "--seed", "17", "--format", "tsv"];
    assert_eq!(sdu(&args).stdout, sdu(&args).stdout);
    let other = sdu(&["semigroup", "--scenario", "scenarios/random8.sdu", "--seed", "18", "--format", "tsv"]);
    assert_eq!(other.status.code(), Some(0));
}

#[test]
fn villa_report_matches_golden_file() {
    let o = sdu(&["example", "villa"]);
    assert_eq!(o.status.code(), Some(0));
    let golden = std::fs::read_to_string(
        PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/golden/villa.txt"),
    )
    .unwrap();
    assert_eq!(stdout(&o), golden);
    assert_eq!(sdu(&["example", "villa"]).stdout, o.stdout);
}

#[test]
fn dpp_and_forward_examples() {
    assert_eq!(sdu(&["example", "dpp"]).status.code(), Some(0));
    assert_eq!(sdu(&["example", "forward"]).status.code(), Some(0));
    let deflated = sdu(&["example", "forward", "--variant", "deflated"]);
    assert_eq!(deflated.status.code(), Some(1));
    assert!(stdout(&deflated).contains("(iv)  martingale optimum     FAIL"));
}

#[test]
fn unknown_villa_variant_is_an_input_error() {
    let o = sdu(&["example", "villa", "--variant", "paper-guessed"]);
    assert_eq!(o.status.code(), Some(2));
}

#[test]
fn missing_and_malformed_files_exit_2() {
    let o = sdu(&["semigroup", "--scenario", "scenarios/nope.sdu"]);
    assert_eq!(o.status.code(), Some(2));

    let dir = tempfile::tempdir().unwrap();
    let bad = dir.path().join("bad.sdu");
    std::fs::write(&bad, "[scenario]\nname = x\n\n[space]\nstates = a, b\ntimes = 0, 1\nt0 = a, b\nt1 = a | c\n")
        .unwrap();
    let o = sdu(&["semigroup", "--scenario", bad.to_str().unwrap()]);
    assert_eq!(o.status.code(), Some(2));
    assert!(String::from_utf8_lossy(&o.stderr).contains("line 8"));
}

#[test]
fn axioms_on_a_small_scenario() {
    let dir = tempfile::tempdir().unwrap();
    let path = dir.path().join("small.sdu");
    std::fs::write(
        &path,
        "[scenario]\nname = small\n\n[space]\nstates = a, b, c\ntimes = 0, 1\nt0 = a, b, c\nt1 = a | b | c\n\n\
         [measure]\na = 0.2\nb = 0.3\nc = 0.5\n\n[utility t=0]\na, b, c = identity\n\n\
         [utility t=1]\na = exp(0.5)\nb = linear(2)\nc = identity\n",
    )
    .unwrap();
    let o = sdu(&["axioms", "--scenario", path.to_str().unwrap(), "--format", "tsv"]);
    assert_eq!(o.status.code(), Some(0), "{}", stdout(&o));
    let out = stdout(&o);
    assert!(out.lines().all(|l| l.ends_with("PASS")));
    assert!(out.lines().any(|l| l.starts_with("ST\t0\t")));
}

#[test]
fn recover_then_check_uniqueness() {
    let dir = tempfile::tempdir().unwrap();
    let out = dir.path().join("recovered.sdu");
    let o = sdu(&["recover", "--scenario", "scenarios/random8.sdu"]);
    assert_eq!(o.status.code(), Some(0), "{}", String::from_utf8_lossy(&o.stderr));
    std::fs::write(&out, &o.stdout).unwrap();
    let u = sdu(&["uniqueness", "--scenario", "scenarios/random8.sdu", "--other", out.to_str().unwrap()]);
    assert_eq!(u.status.code(), Some(0), "{}", stdout(&u));
    assert!(stdout(&u).starts_with("PASS"));
}

#[test]
fn shipped_scenarios_round_trip_byte_for_byte() {
    let dir = tempfile::tempdir().unwrap();
    for name in ["villa.sdu", "binomial.sdu", "random8.sdu"] {
        let original = std::fs::read_to_string(scenario(name)).unwrap();
        let loaded = Scenario::load(scenario(name)).unwrap();
        let copy = dir.path().join(name);
        loaded.save(&copy).unwrap();
        assert_eq!(std::fs::read_to_string(&copy).unwrap(), original, "{name}");
    }
}

#[test]
fn empty_file_is_a_parse_error() {
    let err = Scenario::parse("").unwrap_err();
    assert!(matches!(err, sdu_core::Error::Parse { line: 1, .. }));
}
