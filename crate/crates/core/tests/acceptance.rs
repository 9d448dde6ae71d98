//! Acceptance suite at full trial counts. Each criterion prints one
//! PASS/FAIL line.

use matsqrt_core::selfcheck::{run_criterion, CheckOptions};

fn check(id: usize) {
    let r = run_criterion(id, &CheckOptions::full());
    println!("{r}");
    assert!(r.passed, "{r}");
}

#[test]
fn criterion_01_pade_coefficients() {
    check(1);
}

#[test]
fn criterion_02_pole_minima() {
    check(2);
}

#[test]
fn criterion_03_forward_ordering() {
    check(3);
}

#[test]
fn criterion_04_residual_schedule() {
    check(4);
}

#[test]
fn criterion_05_oracle_agreement() {
    check(5);
}

#[test]
fn criterion_06_gradients() {
    check(6);
}

#[test]
fn criterion_07_operation_counts() {
    check(7);
}

#[test]
fn criterion_08_sign_lemma() {
    check(8);
}

#[test]
fn criterion_09_ns_forms() {
    check(9);
}

#[test]
fn criterion_10_whitening() {
    check(10);
}

#[test]
fn criterion_11_scale_invariance() {
    check(11);
}
