//! Acceptance criteria at full scale. Each test prints one PASS/FAIL line
//! followed by the measured residuals.

use interlace_core::verify::{run_criterion, Scale};

const SEED: u64 = 20_240_602;

fn criterion(id: u32) {
    let rep = run_criterion(id, Scale::Full, SEED);
    let text = rep.to_text();
    let mut lines = text.lines();
    println!(
        "criterion {id:>2}: {} ({})",
        if rep.passed() { "PASS" } else { "FAIL" },
        rep.title
    );
    lines.next();
    for l in lines {
        println!("{l}");
    }
    assert!(rep.passed(), "criterion {id} failed:\n{text}");
}

#[test]
fn criterion_01_commuting_lattice_kernels() {
    criterion(1);
}

#[test]
fn criterion_02_perron_eigenfunctions() {
    criterion(2);
}

#[test]
fn criterion_03_exact_intertwining() {
    criterion(3);
}

#[test]
fn criterion_04_blocking_involution_and_pushing_sums() {
    criterion(4);
}

#[test]
fn criterion_05_periodic_skorohod_oracle() {
    criterion(5);
}

#[test]
fn criterion_06_coupling_marginal_law() {
    criterion(6);
}

#[test]
fn criterion_07_determinant_weight() {
    criterion(7);
}

#[test]
fn criterion_08_product_formula() {
    criterion(8);
}

#[test]
fn criterion_09_fourier_identity() {
    criterion(9);
}

#[test]
fn criterion_10_character_eigenvalues() {
    criterion(10);
}

#[test]
fn criterion_11_determinantal_correlations() {
    criterion(11);
}

#[test]
fn criterion_12_interval_reflection_formulas() {
    criterion(12);
}

#[test]
fn criterion_13_two_particle_brownian_coupling() {
    criterion(13);
}

#[test]
fn criterion_14_reflected_bm_time_reversal() {
    criterion(14);
}
