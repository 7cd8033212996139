//! End-to-end tests of the `resitor` binary: exit codes, stdout shapes,
//! and JSON output files.

use std::path::PathBuf;
use std::process::Command;

fn fixture(name: &str) -> String {
    format!("{}/tests/fixtures/{}", env!("CARGO_MANIFEST_DIR"), name)
}

struct Out {
    code: i32,
    stdout: String,
    stderr: String,
}

fn run_with<F: FnOnce(&mut Command)>(args: &[&str], tweak: F) -> Out {
    let mut cmd = Command::new(env!("CARGO_BIN_EXE_resitor"));
    cmd.args(args);
    tweak(&mut cmd);
    let out = cmd.output().expect("binary failed to start");
    Out {
        code: out.status.code().expect("no exit code"),
        stdout: String::from_utf8(out.stdout).expect("stdout not UTF-8"),
        stderr: String::from_utf8(out.stderr).expect("stderr not UTF-8"),
    }
}

fn run(args: &[&str]) -> Out {
    run_with(args, |_| {})
}

fn temp_path(name: &str) -> PathBuf {
    let mut p = std::env::temp_dir();
    p.push(format!("resitor-cli-test-{}-{name}", std::process::id()));
    p
}

#[test]
fn pair_reports_both_routes() {
    let out = run(&["pair", "--tower", &fixture("cp2.json"), "--monomial", "u1^2"]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(out.stdout.contains("pairing (residue route):     1"), "{}", out.stdout);
    assert!(out.stdout.contains("pairing (normal-form route): 1"), "{}", out.stdout);
}

#[test]
fn pairing_of_a_low_degree_monomial_is_zero() {
    let out = run(&["pair", "--tower", &fixture("cp3.json"), "--monomial", "u1^2"]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(out.stdout.contains("pairing (residue route):     0"), "{}", out.stdout);
}

#[test]
fn todd_genus_of_projective_space_is_one() {
    let out = run(&["genus", "--tower", &fixture("cp3.json"), "--series", "todd"]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert_eq!(out.stdout.trim(), "1");
}

#[test]
fn witten_genus_vanishes_on_the_string_intersection() {
    let out = run(&[
        "genus",
        "--tower",
        &fixture("milnor123.json"),
        "--ci",
        &fixture("milnor123_ci.json"),
        "--series",
        "witten",
        "--q-order",
        "6",
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(out.stdout.contains("q^0: 0"), "{}", out.stdout);
    assert!(out.stdout.contains("exact polynomial"), "{}", out.stdout);
}

#[test]
fn invalid_tower_file_names_the_stage() {
    let out = run(&["genus", "--tower", &fixture("bad_tower.json"), "--series", "todd"]);
    assert_eq!(out.code, 4, "stdout: {}", out.stdout);
    assert!(out.stderr.contains("stage 2"), "{}", out.stderr);
    assert!(out.stderr.contains("twist rows"), "{}", out.stderr);
}

#[test]
fn invalid_budget_env_is_rejected() {
    let out = run_with(
        &["genus", "--tower", &fixture("cp3.json"), "--series", "todd"],
        |cmd| {
            cmd.env("RESITOR_MAX_BUDGET", "abc");
        },
    );
    assert_eq!(out.code, 4, "stdout: {}", out.stdout);
    assert!(out.stderr.contains("RESITOR_MAX_BUDGET"), "{}", out.stderr);
}

#[test]
fn valid_budget_env_is_accepted() {
    let out = run_with(
        &["genus", "--tower", &fixture("cp3.json"), "--series", "todd"],
        |cmd| {
            cmd.env("RESITOR_MAX_BUDGET", "64");
        },
    );
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert_eq!(out.stdout.trim(), "1");
}

#[test]
fn unknown_flag_is_a_usage_error() {
    let out = run(&["pair", "--tower", &fixture("cp2.json"), "--monomial", "u1", "--bogus"]);
    assert_eq!(out.code, 4);
}

#[test]
fn help_and_version_exit_cleanly() {
    let out = run(&["--help"]);
    assert_eq!(out.code, 0);
    assert!(out.stdout.contains("Usage"), "{}", out.stdout);
    let out = run(&["--version"]);
    assert_eq!(out.code, 0);
}

#[test]
fn toric_form_lattice_and_theta_routes_print_the_same_series() {
    let lattice = run(&[
        "toric-form",
        "--fan",
        &fixture("fan_cp2.json"),
        "--method",
        "lattice",
        "--q-order",
        "4",
    ]);
    assert_eq!(lattice.code, 0, "stderr: {}", lattice.stderr);
    assert!(lattice.stdout.contains("q^0: 1/4"), "{}", lattice.stdout);
    assert!(lattice.stdout.contains("q^3: 24"), "{}", lattice.stdout);
    let theta = run(&[
        "toric-form",
        "--tower",
        &fixture("cp2.json"),
        "--method",
        "theta",
        "--q-order",
        "4",
    ]);
    assert_eq!(theta.code, 0, "stderr: {}", theta.stderr);
    assert_eq!(lattice.stdout, theta.stdout);
}

#[test]
fn toric_form_needs_exactly_one_source() {
    let out = run(&["toric-form", "--method", "lattice", "--q-order", "2"]);
    assert_eq!(out.code, 4, "stdout: {}", out.stdout);
    assert!(out.stderr.contains("--fan or --tower"), "{}", out.stderr);
}

#[test]
fn solve_string_finds_the_canonical_classes() {
    let out = run(&[
        "solve-string",
        "--n1",
        "3",
        "--n2",
        "3",
        "--fiber-degrees",
        "1,2,3",
        "--bound",
        "3",
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(out.stdout.contains("classes (3, -2) and (3, 0)"), "{}", out.stdout);
    assert!(out.stdout.contains("1 solution(s)"), "{}", out.stdout);
}

#[test]
fn string_check_certifies_the_milnor_intersection() {
    let out = run(&[
        "string-check",
        "--tower",
        &fixture("milnor123.json"),
        "--ci",
        &fixture("milnor123_ci.json"),
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    assert!(out.stdout.contains("string conditions: CERTIFIED"), "{}", out.stdout);
}

#[test]
fn verification_suites_pass_at_small_orders() {
    let out = run(&["verify", "double-sum", "--q-order", "12"]);
    assert_eq!(out.code, 0, "stdout: {}\nstderr: {}", out.stdout, out.stderr);
    assert!(out.stdout.trim().ends_with("PASS"), "{}", out.stdout);
    let out = run(&["verify", "order-dependence"]);
    assert_eq!(out.code, 0, "stdout: {}", out.stdout);
    assert!(out.stdout.trim().ends_with("PASS"), "{}", out.stdout);
    let out = run(&["verify", "todd-one", "--count", "5", "--seed", "11"]);
    assert_eq!(out.code, 0, "stdout: {}", out.stdout);
    assert!(out.stdout.trim().ends_with("PASS"), "{}", out.stdout);
}

#[test]
fn failed_verification_exits_two() {
    let out = run(&[
        "verify",
        "hirzebruch-forms",
        "--q-order",
        "4",
        "--k-values",
        "1",
        "--tolerance",
        "1e-30",
    ]);
    assert_eq!(out.code, 2, "stdout: {}", out.stdout);
    assert!(out.stdout.trim().ends_with("FAIL"), "{}", out.stdout);
}

#[test]
fn json_output_is_deterministic_and_typed() {
    let path_a = temp_path("genus-a.json");
    let path_b = temp_path("genus-b.json");
    for path in [&path_a, &path_b] {
        let out = run(&[
            "genus",
            "--tower",
            &fixture("cp2.json"),
            "--series",
            "elliptic-half",
            "--q-order",
            "2",
            "--output",
            path.to_str().unwrap(),
        ]);
        assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    }
    let a = std::fs::read_to_string(&path_a).unwrap();
    let b = std::fs::read_to_string(&path_b).unwrap();
    assert_eq!(a, b, "two runs wrote different JSON");
    let v: serde_json::Value = serde_json::from_str(&a).unwrap();
    assert_eq!(v["series"]["q_order"], 2);
    assert_eq!(v["series"]["coeffs"][0]["num"], "1");
    assert_eq!(v["series"]["coeffs"][0]["den"], "4");
    assert_eq!(v["series"]["coeffs"][1]["num"], "6");
    let _ = std::fs::remove_file(&path_a);
    let _ = std::fs::remove_file(&path_b);
}

#[test]
fn pair_json_reports_route_agreement() {
    let path = temp_path("pair.json");
    let out = run(&[
        "pair",
        "--tower",
        &fixture("cp2.json"),
        "--monomial",
        "u1^2",
        "--output",
        path.to_str().unwrap(),
    ]);
    assert_eq!(out.code, 0, "stderr: {}", out.stderr);
    let v: serde_json::Value =
        serde_json::from_str(&std::fs::read_to_string(&path).unwrap()).unwrap();
    assert_eq!(v["routes_agree"], true);
    assert_eq!(v["pairing"]["num"], "1");
    assert_eq!(v["pairing"]["den"], "1");
    let _ = std::fs::remove_file(&path);
}
