//! Certification suite: one test per criterion. Each prints a single
//! pass/fail line with the measured margin (visible with --nocapture) and
//! asserts the criterion at its stated tolerance.
//!
//! The randomized solve set (30 grid instances with oracle comparisons) is
//! computed once and shared by the criteria that consume it.

use std::sync::OnceLock;
use std::time::Instant;

use lpreg::acceptance::{self, CheckResult, RunArtifact};

const SUITE_SEED: u64 = 0x20_26_08_10;

struct SharedRuns {
    runs: Vec<RunArtifact>,
    wall_s: f64,
}

fn shared_runs() -> &'static SharedRuns {
    static RUNS: OnceLock<SharedRuns> = OnceLock::new();
    RUNS.get_or_init(|| {
        let started = Instant::now();
        let runs = acceptance::certification_runs(30, SUITE_SEED).expect("certification runs");
        SharedRuns { runs, wall_s: started.elapsed().as_secs_f64() }
    })
}

fn report(idx: usize, check: &CheckResult) {
    println!(
        "criterion {idx} ({}): {} -- {}",
        check.name,
        if check.pass { "PASS" } else { "FAIL" },
        check.detail
    );
    assert!(check.pass, "criterion {idx} ({}) failed: {}", check.name, check.detail);
}

#[test]
fn criterion_1_oracle_agreement() {
    let shared = shared_runs();
    let mut check = acceptance::check_oracle_agreement(&shared.runs);
    check.detail = format!("{} (solve+oracle wall {:.1}s)", check.detail, shared.wall_s);
    report(1, &check);
}

#[test]
fn criterion_2_hessian_sandwich() {
    report(2, &acceptance::check_hessian_sandwich(SUITE_SEED, 20, 100).expect("sandwich states"));
}

#[test]
fn criterion_3_path_containment() {
    report(3, &acceptance::check_path_containment(&shared_runs().runs));
}

#[test]
fn criterion_4_phase_count() {
    report(4, &acceptance::check_phase_count(&shared_runs().runs));
}

#[test]
fn criterion_5_inner_iterations_and_scaling() {
    report(5, &acceptance::check_agd_iteration_bound(&shared_runs().runs));
    report(5, &acceptance::check_agd_scaling(SUITE_SEED, &[64, 256, 1024, 4096]).expect("bench runs"));
}

#[test]
fn criterion_6_path_speed_bound() {
    report(6, &acceptance::check_speed_bound().expect("speed check"));
}

#[test]
fn criterion_7_initial_point_kkt() {
    report(7, &acceptance::check_initial_kkt(SUITE_SEED, 100).expect("initial point instances"));
}

#[test]
fn criterion_8_stochastic_route() {
    report(8, &acceptance::check_stochastic_route(SUITE_SEED, 20, 50).expect("stochastic runs"));
}

#[test]
fn criterion_9_numerical_hygiene() {
    report(9, &acceptance::check_numerical_hygiene(SUITE_SEED, 50).expect("hygiene checks"));
}
