//! Acceptance harness: ten criteria, one pass/fail line each.
//!
//! Run with `cargo test --test acceptance -- --nocapture` to see every
//! line; each criterion is an independent test with pinned tolerances.

use std::process::Command;

use conegauge::harness::{positivity_checks, run_check_suite, CheckResult, RunConfig};
use conegauge::regulator;

/// Prints the one-line verdict for a criterion backed by suite checks,
/// then fails the test if any check failed.
fn verdict(criterion: &str, checks: &[CheckResult]) {
    let pass = checks.iter().all(|c| c.pass);
    let worst = checks
        .iter()
        .map(|c| {
            if c.threshold != 0.0 {
                (c.measured / c.threshold).abs()
            } else if c.measured == 0.0 {
                0.0
            } else {
                f64::INFINITY
            }
        })
        .fold(0.0f64, f64::max);
    println!(
        "[{}] {criterion}: {} checks, worst margin {worst:.3e} of budget",
        if pass { "pass" } else { "FAIL" },
        checks.len(),
    );
    if !pass {
        for c in checks.iter().filter(|c| !c.pass) {
            println!("  {}", c.line());
        }
        panic!("{criterion} failed");
    }
}

fn suite_checks(suite: &str) -> Vec<CheckResult> {
    let mut cfg = RunConfig::default();
    cfg.suite = suite.to_string();
    let report = run_check_suite(&cfg).expect(suite);
    report.checks
}

#[test]
fn criterion_01_regulator_constant() {
    // Closed form through the CLI, Monte Carlo bracket at 1e7 samples.
    let out = Command::new(env!("CARGO_BIN_EXE_conegauge"))
        .args(["omega", "--n", "1"])
        .output()
        .expect("run omega");
    assert!(out.status.success());
    let text = String::from_utf8_lossy(&out.stdout);
    let value: f64 = text
        .lines()
        .find_map(|l| l.strip_prefix("omega_1 = "))
        .expect("omega_1 line")
        .trim()
        .parse()
        .expect("parse omega_1");
    let exact = 1.0 / (720.0 * (4.0 * std::f64::consts::PI).powi(3));
    let rel = (value - exact).abs() / exact;
    let (est, sigma) = regulator::omega_oracle(1, 10_000_000, 20_240_811).expect("mc oracle");
    let z = (est - exact).abs() / sigma;
    let checks = [
        CheckResult::leq("acceptance.omega1_closed_form_rel", rel, 1e-6),
        CheckResult::leq("acceptance.omega1_mc_z_1e7", z, 3.0),
    ];
    verdict("criterion 1 (regulator constant)", &checks);
}

#[test]
fn criterion_02_algebra() {
    verdict("criterion 2 (algebra suite)", &suite_checks("algebra"));
}

#[test]
fn criterion_03_kinematics() {
    verdict("criterion 3 (kinematics suite)", &suite_checks("kinematics"));
}

#[test]
fn criterion_04_constraints() {
    verdict("criterion 4 (constraint suite)", &suite_checks("constraints"));
}

#[test]
fn criterion_05_gradient() {
    let start = std::time::Instant::now();
    let checks = suite_checks("gradient");
    assert!(
        start.elapsed() < std::time::Duration::from_secs(120),
        "gradient suite exceeded its two-minute budget"
    );
    verdict("criterion 5 (Hamilton gradient suite)", &checks);
}

#[test]
fn criterion_06_maxwell_limit() {
    verdict("criterion 6 (Maxwell-limit suite)", &suite_checks("maxwell"));
}

#[test]
fn criterion_07_nonlinear_conservation() {
    verdict(
        "criterion 7 (nonlinear conservation suite)",
        &suite_checks("conservation"),
    );
}

#[test]
fn criterion_08_positivity_1000_draws() {
    let cfg = RunConfig::default();
    let checks = positivity_checks(&cfg, 1000).expect("positivity checks");
    verdict("criterion 8 (positivity, 1000 draws)", &checks);
}

#[test]
fn criterion_09_matter_probe() {
    verdict("criterion 9 (matter probe suite)", &suite_checks("matter"));
}

#[test]
fn criterion_10_determinism() {
    verdict("criterion 10 (determinism)", &suite_checks("determinism"));
}
