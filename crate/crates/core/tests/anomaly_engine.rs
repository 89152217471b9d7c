use psido_core::anomaly::{
    auto_cut, det_q_anomaly, k_symbol, l_symbol, log_det_weighted, log_det_zeta_local, trq_l, w_tau, zeta_anomaly_local,
    AnomalyConfig, CutOperator,
};
use psido_core::holo::SpectralCut;
use psido_core::linalg::{c, CMat};
use psido_core::operators::{dirac_shift, laplacian_power, perturbed_matrix_multiplier, shifted_laplacian_power};
use psido_core::star::star_product;
use psido_core::trace::residue;
use std::f64::consts::PI;

const G: usize = 64;

fn cfg() -> AnomalyConfig {
    AnomalyConfig::default()
}

fn op(symbol: psido_core::symbol::PolyhomSymbol) -> CutOperator {
    let cut = auto_cut(&symbol, 512).unwrap();
    CutOperator::new(symbol, cut)
}

fn mat(v: [f64; 4]) -> CMat {
    CMat::from_row_slice(2, 2, &[c(v[0]), c(v[1]), c(v[2]), c(v[3])])
}

fn pair(eps: f64) -> (CutOperator, CutOperator) {
    let a = perturbed_matrix_multiplier(1.0, &mat([2.0, 0.5, 0.3, 1.0]), &mat([0.0, 1.0, -1.0, 0.5]), eps, 8, G).unwrap();
    let b = perturbed_matrix_multiplier(1.0, &mat([1.5, -0.2, 0.4, 1.0]), &mat([0.3, 0.0, 0.7, -0.4]), eps, 8, G).unwrap();
    (op(a), op(b))
}

fn sqrt_lap() -> CutOperator {
    op(laplacian_power(0.5, 8, G).unwrap())
}

#[test]
fn auto_cut_avoids_the_spectrum() {
    let d = dirac_shift(c(0.3), 8, G).unwrap();
    let cut = auto_cut(&d, 512).unwrap();
    // Spectrum n + 0.3 lies on the real axis.
    assert!((cut.theta - PI / 2.0).abs() < 1e-12 || (cut.theta - 3.0 * PI / 2.0).abs() < 1e-12);
    let cut = auto_cut(&laplacian_power(1.0, 8, G).unwrap(), 512).unwrap();
    assert!((cut.theta - PI).abs() < 1e-12);
}

#[test]
fn local_zeta_determinant_of_one_minus_laplacian() {
    let a = CutOperator::new(shifted_laplacian_power(1.0, c(1.0), 8, G).unwrap(), SpectralCut::new(PI));
    let det = log_det_zeta_local(&a, &cfg()).unwrap();
    let expect = (4.0 * PI.sinh().powi(2)).ln();
    assert!((det.log_det.re - expect).abs() < 1e-4 * expect, "{} vs {expect}", det.log_det);
    assert!(det.log_det.im.abs() < 1e-8, "{}", det.log_det);
}

#[test]
fn l_vanishes_for_commuting_scalars() {
    let a = op(dirac_shift(c(0.3), 8, G).unwrap());
    let b = sqrt_lap();
    let l = l_symbol(&a, &b, None, &cfg()).unwrap();
    assert!(l.max_component_norm() < 1e-8, "{}", l.max_component_norm());
}

#[test]
fn commuting_anomaly_reduces_to_squared_log_residue() {
    let a = op(dirac_shift(c(0.3), 8, G).unwrap());
    let b = sqrt_lap();
    let r = zeta_anomaly_local(&a, &b, None, &cfg()).unwrap();
    assert!(r.commuting);
    let f = r.commuting_formula.unwrap();
    assert!((r.log_m_local - f).norm() < 1e-8);
    let k = k_symbol(&a, &b, None, &cfg()).unwrap();
    assert!((residue(&k) + r.log_m_local).norm() < 1e-12);
}

#[test]
fn residue_of_l_vanishes_for_noncommuting_pair() {
    let (a, b) = pair(0.4);
    let l = l_symbol(&a, &b, None, &cfg()).unwrap();
    assert!(l.max_component_norm() > 1e-3);
    assert!(residue(l.as_log()).norm() < 1e-7);
}

#[test]
fn defect_and_path_formulas_agree() {
    let (a, b) = pair(0.4);
    let r = det_q_anomaly(&a, &b, &b, None, &cfg()).unwrap();
    assert!((r.defect - r.path.value).norm() < 1e-5, "{} vs {}", r.defect, r.path.value);
    let q = sqrt_lap();
    let r2 = det_q_anomaly(&a, &b, &q, None, &cfg()).unwrap();
    assert!((r2.defect - r2.path.value).norm() < 1e-5);
    let p = trq_l(&a, &b, &q, None, &cfg()).unwrap();
    assert!((p.value - r2.path.value).norm() < 1e-12);
}

#[test]
fn weighted_assemblies_agree_for_noncommuting_pair() {
    let (a, b) = pair(0.4);
    let r = zeta_anomaly_local(&a, &b, None, &cfg()).unwrap();
    assert!(!r.commuting);
    assert!((r.log_m_local - r.swapped).norm() < 1e-6);
    assert_eq!(r.tau_nodes.len(), 16);
}

#[test]
fn zeta_and_weighted_determinants_differ_by_a_residue() {
    let a = CutOperator::new(shifted_laplacian_power(1.0, c(1.0), 8, G).unwrap(), SpectralCut::new(PI));
    let q = CutOperator::new(shifted_laplacian_power(2.0, c(0.5), 8, G).unwrap(), SpectralCut::new(PI));
    let cfg = cfg();
    let z = log_det_zeta_local(&a, &cfg).unwrap().log_det;
    let w = log_det_weighted(&a, &q, &cfg).unwrap().value;
    let la = a.log(8).unwrap();
    let lq = q.log(8).unwrap();
    let diff = la.sub(&lq.scale(c(a.order() / q.order()))).unwrap();
    let sq = star_product(&diff, &diff, 8).unwrap();
    let total = z - w + residue(&sq) / (2.0 * a.order());
    assert!(total.norm() < 1e-5, "{total}");
}

#[test]
fn w_vanishes_for_commuting_pair_and_is_continuous_in_tau() {
    let a = op(dirac_shift(c(0.3), 8, G).unwrap());
    let b = sqrt_lap();
    let w = w_tau(&a, &b, 0.5, None, &cfg()).unwrap();
    assert!(w.max_component_norm() < 1e-6, "{}", w.max_component_norm());

    let (a, b) = pair(0.4);
    let cfg = AnomalyConfig { depth: 3, ..cfg() };
    let ws: Vec<_> = [0.0, 0.5, 0.51, 1.0].iter().map(|&t| w_tau(&a, &b, t, None, &cfg).unwrap()).collect();
    assert!(ws[0].max_component_norm() > 1e-4);
    let near = ws[1].as_log().distance(ws[2].as_log()).unwrap();
    let far = ws[0].as_log().distance(ws[3].as_log()).unwrap();
    assert!(near < 0.1 * far.max(1e-3), "{near} vs {far}");
}
