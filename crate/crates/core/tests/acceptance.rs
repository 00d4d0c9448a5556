//! Acceptance suite: every criterion at its stated tolerance, one
//! PASS/FAIL line per criterion.

use std::io::Write;

use sqmean::harness::verify::{self, Outcome};

/// Written to the stdout handle directly so the line shows without
/// `--nocapture`.
fn report(o: Outcome) {
    let _ = writeln!(std::io::stdout().lock(), "{o}");
    assert!(o.passed, "{o}");
}

#[test]
fn criterion_1_quantile_contract() {
    report(verify::quantile_contract());
}

#[test]
fn criterion_2_dyadic_bound() {
    report(verify::dyadic_bound());
}

#[test]
fn criterion_3_known_bound_estimator() {
    report(verify::known_bound());
}

#[test]
fn criterion_4_signed_mean() {
    report(verify::signed_mean_bound());
}

#[test]
fn criterion_5_median_shift() {
    report(verify::median_shift());
}

#[test]
fn criterion_6_vector_mean() {
    report(verify::vector_mean_bound());
}

#[test]
fn criterion_7_comm_simulation() {
    report(verify::comm_simulation());
}

#[test]
fn criterion_8_heavy_tail_comparison() {
    report(verify::heavy_tail_comparison());
}

#[test]
fn criterion_9_determinism() {
    let dir = tempfile::tempdir().unwrap();
    report(verify::determinism(dir.path()));
}
