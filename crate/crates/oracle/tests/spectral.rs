use num_complex::Complex64;
use psido_core::holo::SpectralCut;
use psido_core::linalg::{c, CMat};
use psido_core::operators::{dirac_shift, laplacian_power, perturbed_matrix_multiplier, shifted_laplacian_power};
use psido_oracle::*;
use std::f64::consts::PI;

const G: usize = 8;

fn cfg() -> OracleConfig {
    OracleConfig::default()
}

fn lap(p: f64) -> MultiplierOperator {
    MultiplierOperator::new(laplacian_power(p, 8, G).unwrap(), SpectralCut::new(PI)).unwrap()
}

#[test]
fn zeta_of_sqrt_laplacian_at_two() {
    let z = zeta(&lap(0.5), c(2.0), &cfg()).unwrap();
    let expect = PI / PI.tanh();
    assert!((z.value - expect).norm() < 1e-12, "{}", z.value);
}

#[test]
fn zeta_at_zero_vanishes_for_sqrt_laplacian() {
    let z0 = zeta_at_zero(&lap(0.5), &cfg()).unwrap();
    assert!(z0.norm() < 1e-8, "{z0}");
}

#[test]
fn determinant_of_one_minus_laplacian() {
    let d = det_zeta_spectral(&lap(1.0), &cfg()).unwrap();
    let expect = 4.0 * PI.sinh().powi(2);
    assert!((d.re - expect).abs() < 1e-6 * expect, "{d} vs {expect}");
    assert!(d.im.abs() < 1e-6 * expect);
    let half = log_det_zeta_spectral(&lap(0.5), &cfg()).unwrap();
    assert!((2.0 * half.re - expect.ln()).abs() < 1e-6);
}

#[test]
fn determinant_of_shifted_laplacian() {
    // Π_n (n² + c) = 4 sinh²(π√c).
    let cc = 2.0f64;
    let op = MultiplierOperator::new(shifted_laplacian_power(cc, c(1.0), 8, G).unwrap(), SpectralCut::new(PI)).unwrap();
    let d = log_det_zeta_spectral(&op, &cfg()).unwrap();
    let expect = (4.0 * (PI * cc.sqrt()).sinh().powi(2)).ln();
    assert!((d.re - expect).abs() < 1e-6, "{d} vs {expect}");
}

#[test]
fn stable_under_refinement() {
    let a = lap(0.5);
    let fine = OracleConfig { modes: 8192, terms: 7 };
    let s = Complex64::new(-0.3, 0.2);
    let z1 = zeta(&a, s, &cfg()).unwrap();
    let z2 = zeta(&a, s, &fine).unwrap();
    assert!((z1.value - z2.value).norm() < 1e-8);
    assert!(z2.error_estimate < z1.error_estimate);
    let d = dirac_shift(c(0.3), 8, G).unwrap();
    let d = MultiplierOperator::new(d, SpectralCut::new(PI / 2.0)).unwrap();
    let l1 = log_det_zeta_spectral(&d, &cfg()).unwrap();
    let l2 = log_det_zeta_spectral(&d, &fine).unwrap();
    assert!((l1 - l2).norm() < 1e-6, "{l1} vs {l2}");
}

#[test]
fn dirac_shift_determinant_matches_product_formula() {
    // Π_n (n + c) regularizes to 2i sin(πc) with the cut at π/2: negative modes carry arg −π.
    let cc = 0.3;
    let d = MultiplierOperator::new(dirac_shift(c(cc), 8, G).unwrap(), SpectralCut::new(PI / 2.0)).unwrap();
    let l = log_det_zeta_spectral(&d, &cfg()).unwrap();
    let m = l.exp();
    assert!((m.norm() - 2.0 * (PI * cc).sin()).abs() < 1e-6, "{m}");
}

#[test]
fn near_pole_is_rejected() {
    assert!(matches!(zeta(&lap(0.5), c(1.0 + 1e-4), &cfg()), Err(OracleError::NearPole { .. })));
}

#[test]
fn self_anomaly_vanishes() {
    let a = lap(0.5);
    let m = anomaly_spectral(&a, &a, SpectralCut::new(PI), &cfg()).unwrap();
    assert!(m.norm() < 1e-6, "{m}");
    let m = anomaly_spectral(&lap(1.0), &a, SpectralCut::new(PI), &cfg()).unwrap();
    assert!(m.norm() < 1e-6, "{m}");
}

#[test]
fn weighted_trace_of_inverse_sqrt_laplacian() {
    let a = lap(-0.5);
    let w1 = weighted_trace_spectral(&a, &lap(0.5), &cfg()).unwrap();
    let w2 = weighted_trace_spectral(&a, &lap(1.0), &cfg()).unwrap();
    // log Q / q is unchanged under Q → Q².
    assert!((w1 - w2).norm() < 1e-8);
    let id = MultiplierOperator::new(laplacian_power(0.0, 8, G).unwrap(), SpectralCut::new(PI)).unwrap();
    assert!(weighted_trace_spectral(&id, &lap(0.5), &cfg()).unwrap().norm() < 1e-8);
}

#[test]
fn expansion_matches_mode_map() {
    let lead = CMat::from_row_slice(2, 2, &[c(2.0), c(0.5), c(0.3), c(1.0)]);
    let pert = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(-1.0), c(0.5)]);
    let s = perturbed_matrix_multiplier(1.0, &lead, &pert, 0.4, 8, G).unwrap();
    let op = MultiplierOperator::new(s, SpectralCut::new(PI)).unwrap();
    // Remainder after depth 8 stays O(|n|^{a−8}) with a bounded constant.
    let d = op.expansion_defect(32);
    assert!(d < 1e3, "{d}");
    op.check_admissible(512).unwrap();
}
