use num_complex::Complex64;
use psido_core::grid::grid_point;
use psido_core::holo::{
    complex_power_symbol, log_symbol, real_power_symbol, resolvent_symbols, sectorial_projector_symbol, HoloError,
    SpectralCut,
};
use psido_core::linalg::{c, frob, CMat};
use psido_core::operators::{dirac_shift, laplacian_power, perturbed_matrix_multiplier, x_dependent_symbol};
use psido_core::star::{inverse_symbol, star_product};
use psido_core::symbol::{LogPolyhomSymbol, PolyhomSymbol};
use std::f64::consts::PI;

const G: usize = 64;

fn val(s: &LogPolyhomSymbol, j: usize, l: usize, positive: bool) -> Complex64 {
    s.component(j, l).unwrap().side(positive).sample(0)[(0, 0)]
}

fn xi_sq_plus_one(depth: usize) -> PolyhomSymbol {
    laplacian_power(1.0, depth, G).unwrap()
}

fn two_by_two(eps: f64) -> PolyhomSymbol {
    let lead = CMat::from_row_slice(2, 2, &[c(2.0), c(0.5), c(0.3), c(1.0)]);
    let pert = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(-1.0), c(0.5)]);
    perturbed_matrix_multiplier(1.0, &lead, &pert, eps, 8, G).unwrap()
}

/// 2×2 principal power through the eigendecomposition.
fn eig_power(m: &CMat, z: Complex64) -> CMat {
    let (p, q, r, s) = (m[(0, 0)], m[(0, 1)], m[(1, 0)], m[(1, 1)]);
    let tr = p + s;
    let det = p * s - q * r;
    let disc = (tr * tr / 4.0 - det).sqrt();
    let (l1, l2) = (tr / 2.0 + disc, tr / 2.0 - disc);
    let id = CMat::identity(2, 2);
    // Lagrange interpolation on distinct eigenvalues.
    let f1 = (z * l1.ln()).exp();
    let f2 = (z * l2.ln()).exp();
    (m - &id * l2) * (f1 / (l1 - l2)) + (m - &id * l1) * (f2 / (l2 - l1))
}

#[test]
fn resolvent_components_of_xi_sq_plus_one() {
    let s = xi_sq_plus_one(5);
    for lambda in [Complex64::new(-2.0, 0.5), Complex64::new(0.3, 3.0)] {
        let b = resolvent_symbols(&s, lambda, 5).unwrap();
        let inv = (c(1.0) - lambda).inv();
        for positive in [true, false] {
            assert!((b[0].side(positive).sample(0)[(0, 0)] - inv).norm() < 1e-14);
            assert!(b[1].side(positive).sample(0)[(0, 0)].norm() < 1e-14);
            assert!((b[2].side(positive).sample(0)[(0, 0)] + inv * inv).norm() < 1e-14);
        }
    }
}

#[test]
fn resolvent_components_sum_to_the_exact_resolvent() {
    // b_{−a−j}(tξ, t^a λ) = t^{−a−j} b_{−a−j}(ξ, λ).
    let s = two_by_two(0.4);
    let exact = s.exact().unwrap().raw(0.0);
    let _ = exact;
    let lambda = Complex64::new(-1.0, 0.7);
    let b = resolvent_symbols(&s, lambda, 8).unwrap();
    for (t, positive) in [(60.0, true), (60.0, false)] {
        let xi = if positive { t } else { -t };
        let m = s.exact().unwrap().raw(xi)[0].clone() - CMat::identity(2, 2) * (lambda * t);
        let direct = m.try_inverse().unwrap();
        let mut approx = CMat::zeros(2, 2);
        for (j, comp) in b.iter().enumerate() {
            approx += comp.side(positive).sample(0) * c(t.powi(-1 - j as i32));
        }
        assert!(frob(&(direct - approx)) < 1e-9 * t.powi(-1));
    }
}

#[test]
fn near_spectrum_is_rejected() {
    let s = xi_sq_plus_one(3);
    assert!(matches!(resolvent_symbols(&s, c(1.0), 3), Err(HoloError::NearSpectrum { .. })));
}

#[test]
fn power_zero_is_identity() {
    let s = two_by_two(0.2);
    let p = complex_power_symbol(&s, c(0.0), SpectralCut::default(), 6).unwrap();
    assert_eq!(p.order(), c(0.0));
    assert!(frob(&(p.comp(0).plus.sample(0) - CMat::identity(2, 2))) == 0.0);
    for j in 1..6 {
        assert!(p.comp(j).max_norm() == 0.0);
    }
}

#[test]
fn inverse_square_root_of_xi_sq_plus_one() {
    let s = xi_sq_plus_one(6);
    let p = complex_power_symbol(&s, c(-0.5), SpectralCut::new(PI), 6).unwrap();
    assert!((p.order() - c(-1.0)).norm() < 1e-15);
    let expect = [1.0, 0.0, -0.5, 0.0, 0.375, 0.0];
    for (j, e) in expect.iter().enumerate() {
        for positive in [true, false] {
            assert!((val(p.as_log(), j, 0, positive) - e).norm() < 1e-9, "component {j}");
        }
    }
}

#[test]
fn group_law_for_matrix_multiplier() {
    let s = two_by_two(0.5);
    let cut = SpectralCut::default();
    let a = complex_power_symbol(&s, c(-0.3), cut, 6).unwrap();
    let b = complex_power_symbol(&s, c(-0.4), cut, 6).unwrap();
    let ab = complex_power_symbol(&s, c(-0.7), cut, 6).unwrap();
    let prod = star_product(a.as_log(), b.as_log(), 6).unwrap();
    assert!(prod.distance(ab.as_log()).unwrap() < 1e-8);
    // Positive and shifted exponents.
    let h = complex_power_symbol(&s, c(0.5), cut, 6).unwrap();
    let hh = star_product(h.as_log(), h.as_log(), 6).unwrap();
    assert!(hh.distance(&s.truncate(6).unwrap().to_log()).unwrap() < 1e-8);
}

#[test]
fn multiplier_power_expansion_matches_eigendecomposition() {
    let s = two_by_two(0.5);
    let z = Complex64::new(-0.6, 0.3);
    let p = complex_power_symbol(&s, z, SpectralCut::default(), 8).unwrap();
    for xi in [40.0, -40.0] {
        let direct = eig_power(&s.exact().unwrap().raw(xi)[0], z);
        let approx = p.expansion_sample(0, xi);
        assert!(frob(&(&direct - &approx)) < 1e-10, "{}", frob(&(&direct - &approx)));
        let exact = p.exact().unwrap().raw(xi)[0].clone();
        assert!(frob(&(&direct - &exact)) < 1e-11);
    }
}

#[test]
fn powers_of_x_dependent_symbol_compose() {
    let f = |x: f64| 2.0 + 0.5 * x.sin();
    let depth = 5;
    let mut comps: Vec<(Box<dyn Fn(f64) -> CMat>, Box<dyn Fn(f64) -> CMat>)> = vec![(
        Box::new(move |x| CMat::from_element(1, 1, c(f(x)))),
        Box::new(move |x| CMat::from_element(1, 1, c(1.5 * f(x)))),
    )];
    comps.push((Box::new(|x| CMat::from_element(1, 1, c(x.cos()))), Box::new(|_| CMat::from_element(1, 1, c(0.2)))));
    for _ in 2..depth {
        comps.push((Box::new(|_| CMat::zeros(1, 1)), Box::new(|_| CMat::zeros(1, 1))));
    }
    let s = x_dependent_symbol(c(1.0), &comps, G).unwrap();
    let cut = SpectralCut::default();
    let m1 = complex_power_symbol(&s, c(-1.0), cut, depth).unwrap();
    let inv = inverse_symbol(&s, depth).unwrap();
    assert!(m1.as_log().distance(inv.as_log()).unwrap() < 1e-8);
    let h = complex_power_symbol(&s, c(-0.5), cut, depth).unwrap();
    let hh = star_product(h.as_log(), h.as_log(), depth).unwrap();
    assert!(hh.distance(inv.as_log()).unwrap() < 1e-8);
    for k in [0, 17, 40] {
        let x = grid_point(k, G);
        assert!((h.comp(0).plus.sample(k)[(0, 0)] - f(x).powf(-0.5)).norm() < 1e-10);
    }
}

#[test]
fn log_of_scaled_xi_depends_on_the_cut() {
    let cc = 1.7f64;
    let s = PolyhomSymbol::multiplier(
        c(1.0),
        &[CMat::from_element(1, 1, c(cc)), CMat::zeros(1, 1)],
        &[CMat::from_element(1, 1, c(-cc)), CMat::zeros(1, 1)],
        G,
        None,
    )
    .unwrap();
    assert!(matches!(log_symbol(&s, SpectralCut::new(PI), 2), Err(HoloError::Inadmissible { .. })));
    for (theta, arg) in [(PI / 2.0, -PI), (3.0 * PI / 2.0, PI)] {
        let l = log_symbol(&s, SpectralCut::new(theta), 2).unwrap();
        assert!((val(&l, 0, 0, true) - cc.ln()).norm() < 1e-8);
        assert!((val(&l, 0, 0, false) - Complex64::new(cc.ln(), arg)).norm() < 1e-8);
        assert!((val(&l, 0, 1, true) - 1.0).norm() < 1e-15);
    }
}

#[test]
fn log_of_sqrt_xi_sq_plus_one() {
    let s = laplacian_power(0.5, 6, G).unwrap();
    let l = log_symbol(&s, SpectralCut::default(), 6).unwrap();
    assert_eq!(l.log_type(), 1);
    let expect = [0.0, 0.0, 0.5, 0.0, -0.25, 0.0];
    for (j, e) in expect.iter().enumerate() {
        assert!((val(&l, j, 0, true) - e).norm() < 1e-8, "component {j}: {}", val(&l, j, 0, true));
    }
    assert!((val(&l, 0, 1, false) - 1.0).norm() < 1e-15);
    for j in 1..6 {
        assert!(l.component(j, 1).unwrap().max_norm() == 0.0);
    }
}

#[test]
fn log_of_real_power_scales() {
    let s = two_by_two(0.5);
    let cut = SpectralCut::default();
    let t = 0.7;
    let st = real_power_symbol(&s, t, cut, 6).unwrap();
    let la = log_symbol(&s, cut, 6).unwrap();
    let lt = log_symbol(&st, cut, 6).unwrap();
    assert!(lt.distance(&la.scale(c(t))).unwrap() < 1e-8);
}

#[test]
fn projector_vanishes_without_leading_spectrum_in_the_cone() {
    let s = two_by_two(0.5);
    // Leading eigenvalues are positive reals; the cone is the upper-left quadrant.
    let p = sectorial_projector_symbol(&s, PI / 2.0, PI, 6).unwrap();
    assert!(p.max_component_norm() < 1e-8);
}

#[test]
fn projector_of_shifted_dirac_operator() {
    let s = dirac_shift(c(0.3), 6, G).unwrap();
    let (theta, phi) = (PI / 2.0, 3.0 * PI / 2.0);
    let p = sectorial_projector_symbol(&s, theta, phi, 6).unwrap();
    assert!((val(p.as_log(), 0, 0, false) - 1.0).norm() < 1e-9);
    assert!(val(p.as_log(), 0, 0, true).norm() < 1e-9);
    let pp = star_product(p.as_log(), p.as_log(), 6).unwrap();
    assert!(pp.distance(p.as_log()).unwrap() < 1e-7);
    let lt = log_symbol(&s, SpectralCut::new(theta), 6).unwrap();
    let lp = log_symbol(&s, SpectralCut::new(phi), 6).unwrap();
    let lhs = lt.sub(&lp).unwrap();
    let rhs = p.as_log().scale(Complex64::new(0.0, -2.0 * PI));
    assert!(lhs.distance(&rhs).unwrap() < 1e-7);
    // Exact per-mode projector: modes n + 0.3 < 0 lie in the cone.
    let e = p.exact().unwrap();
    assert!((e.raw(-2.0)[0][(0, 0)] - 1.0).norm() < 1e-10);
    assert!(e.raw(2.0)[0][(0, 0)].norm() < 1e-10);
}
