//! Acceptance criteria A1 to A13 at the recorded seed. Each test prints one
//! PASS or FAIL line that survives output capture.

use std::io::Write;

use stickyflow::verify::acceptance::{run_one, AcceptanceConfig};

fn criterion(id: &str) {
    let cfg = AcceptanceConfig::default();
    let result = run_one(id, &cfg).expect("known criterion");
    let line = match &result {
        Ok(c) => c.summary_line(),
        Err(e) => format!("FAIL {id}: {e}"),
    };
    let _ = writeln!(std::io::stderr(), "{line}");
    let c = result.unwrap();
    assert!(c.pass, "{line}");
}

#[test]
fn a01_gauge_invariance() {
    criterion("A1");
}

#[test]
fn a02_projection_identity() {
    criterion("A2");
}

#[test]
fn a03_family_algebra() {
    criterion("A3");
}

#[test]
fn a04_drift_identity() {
    criterion("A4");
}

#[test]
fn a05_flow_property() {
    criterion("A5");
}

#[test]
fn a06_coalescing_flow() {
    criterion("A6");
}

#[test]
fn a07_n_point_equivalence() {
    criterion("A7");
}

#[test]
fn a08_pair_exit_moments() {
    criterion("A8");
}

#[test]
fn a09_diagonal_exit_law() {
    criterion("A9");
}

#[test]
fn a10_sticky_occupation() {
    criterion("A10");
}

#[test]
fn a11_strip_exit_bounds() {
    criterion("A11");
}

#[test]
fn a12_occupation_bounds() {
    criterion("A12");
}

#[test]
fn a13_martingale_gates() {
    criterion("A13");
}
