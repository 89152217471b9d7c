use num_complex::Complex64;
use proptest::prelude::*;
use psido_core::grid::{grid_point, PeriodicMatrixFunction};
use psido_core::linalg::{c, frob, CMat};
use psido_core::star::{commutator_symbol, homog_eval, inverse_symbol, star_product};
use psido_core::symbol::{ExactEvaluator, HomogComponent, LogPolyhomSymbol, PolyhomSymbol, SymbolError};

const G: usize = 64;

fn s1(v: f64) -> CMat {
    CMat::from_element(1, 1, c(v))
}

/// `ξ² + 1` as a multiplier of depth `n`.
fn xi_sq_plus_one(n: usize) -> PolyhomSymbol {
    let vals: Vec<CMat> = (0..n).map(|j| s1(if j == 0 || j == 2 { 1.0 } else { 0.0 })).collect();
    let exact = ExactEvaluator::multiplier(|xi| s1(xi * xi + 1.0));
    let ExactEvaluator::Multiplier(f) = exact else { unreachable!() };
    PolyhomSymbol::multiplier(c(2.0), &vals, &vals, G, Some(f)).unwrap()
}

fn scalar_fn(f: impl Fn(f64) -> f64) -> PeriodicMatrixFunction {
    PeriodicMatrixFunction::from_fn(G, |x| s1(f(x)))
}

fn x_dependent(order: f64, comps: Vec<(PeriodicMatrixFunction, PeriodicMatrixFunction)>) -> PolyhomSymbol {
    let cs = comps
        .into_iter()
        .enumerate()
        .map(|(j, (p, m))| HomogComponent::new(c(order - j as f64), p, m))
        .collect();
    PolyhomSymbol::new(c(order), cs, None).unwrap()
}

fn max_dev_from_identity(s: &LogPolyhomSymbol) -> f64 {
    let mut worst: f64 = 0.0;
    for (j, row) in s.components().iter().enumerate() {
        for (l, comp) in row.iter().enumerate() {
            for side in [&comp.plus, &comp.minus] {
                for k in 0..G {
                    let mut m = side.sample(k).clone();
                    if j == 0 && l == 0 {
                        m -= CMat::identity(m.nrows(), m.nrows());
                    }
                    worst = worst.max(frob(&m));
                }
            }
        }
    }
    worst
}

#[test]
fn identity_is_neutral() {
    let tau = xi_sq_plus_one(6);
    let id = LogPolyhomSymbol::identity(G, 1, 6);
    let p = star_product(&id, tau.as_log(), 6).unwrap();
    assert!(p.distance(tau.as_log()).unwrap() < 1e-14);
    let q = star_product(tau.as_log(), &id, 6).unwrap();
    assert!(q.distance(tau.as_log()).unwrap() < 1e-14);
}

#[test]
fn square_of_xi_sq_plus_one() {
    let s = xi_sq_plus_one(6);
    let p = star_product(s.as_log(), s.as_log(), 6).unwrap();
    assert_eq!(p.order(), c(4.0));
    let expect = [1.0, 0.0, 2.0, 0.0, 1.0, 0.0];
    for (j, e) in expect.iter().enumerate() {
        let comp = p.component(j, 0).unwrap();
        assert!((comp.plus.sample(0)[(0, 0)] - e).norm() < 1e-14);
        assert!((comp.minus.sample(0)[(0, 0)] - e).norm() < 1e-14);
    }
    // Pointwise against the exact product symbol.
    for xi in [2.0, -3.0, 7.5] {
        let direct = (xi * xi + 1.0f64).powi(2);
        assert!((p.expansion_at(0.3, xi)[(0, 0)] - direct).norm() < 1e-10 * direct);
        assert!((homog_eval(&p, 0.3, xi)[(0, 0)] - direct).norm() < 1e-10 * direct);
    }
}

#[test]
fn matrix_multipliers_multiply_componentwise() {
    let p0 = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(0.5), c(3.0)]);
    let p1 = CMat::from_row_slice(2, 2, &[c(0.0), Complex64::new(0.0, 1.0), c(1.0), c(-1.0)]);
    let q0 = CMat::from_row_slice(2, 2, &[c(2.0), c(-1.0), c(0.0), c(1.0)]);
    let q1 = CMat::from_row_slice(2, 2, &[c(0.3), c(0.0), c(1.0), c(0.7)]);
    let a = PolyhomSymbol::multiplier(c(1.0), &[p0.clone(), p1.clone()], &[p0.clone(), -p1.clone()], G, None).unwrap();
    let b = PolyhomSymbol::multiplier(c(0.5), &[q0.clone(), q1.clone()], &[q0.clone(), q1.clone()], G, None).unwrap();
    let prod = star_product(a.as_log(), b.as_log(), 2).unwrap();
    // ∂_ξ a_1 contributes only through ∂_x b, which vanishes.
    let e0 = &p0 * &q0;
    let e1 = &p0 * &q1 + &p1 * &q0;
    assert!(frob(&(prod.component(0, 0).unwrap().plus.sample(5) - &e0)) < 1e-14);
    assert!(frob(&(prod.component(1, 0).unwrap().plus.sample(5) - &e1)) < 1e-14);
    let e1m = &p0 * &q1 - &p1 * &q0;
    assert!(frob(&(prod.component(1, 0).unwrap().minus.sample(0) - &e1m)) < 1e-14);
    assert!(prod.is_multiplier());
}

#[test]
fn inverse_of_xi_sq_plus_one_is_geometric() {
    let s = xi_sq_plus_one(7);
    let inv = inverse_symbol(&s, 7).unwrap();
    assert_eq!(inv.order(), c(-2.0));
    let expect = [1.0, 0.0, -1.0, 0.0, 1.0, 0.0, -1.0];
    for (j, e) in expect.iter().enumerate() {
        assert!((inv.comp(j).plus.sample(0)[(0, 0)] - e).norm() < 1e-14, "component {j}");
    }
    let r = star_product(s.as_log(), inv.as_log(), 7).unwrap();
    assert!(max_dev_from_identity(&r) < 1e-14);
}

#[test]
fn inverse_of_x_dependent_first_order_symbol() {
    let f = scalar_fn(|x| 2.0 + x.sin());
    let s = x_dependent(
        1.0,
        (0..6)
            .map(|j| {
                if j == 0 {
                    (f.clone(), f.scale(c(-1.0)))
                } else {
                    (PeriodicMatrixFunction::zero(G, 1), PeriodicMatrixFunction::zero(G, 1))
                }
            })
            .collect(),
    );
    let inv = inverse_symbol(&s, 6).unwrap();
    for k in 0..G {
        let x = grid_point(k, G);
        assert!((inv.comp(0).plus.sample(k)[(0, 0)] - 1.0 / (2.0 + x.sin())).norm() < 1e-14);
        assert!((inv.comp(0).minus.sample(k)[(0, 0)] + 1.0 / (2.0 + x.sin())).norm() < 1e-14);
    }
    let r = star_product(s.as_log(), inv.as_log(), 6).unwrap();
    assert!(max_dev_from_identity(&r) < 1e-8);
    let l = star_product(inv.as_log(), s.as_log(), 6).unwrap();
    assert!(max_dev_from_identity(&l) < 1e-8);
}

#[test]
fn singular_leading_component_is_reported() {
    let f = scalar_fn(|x| x.sin());
    let s = x_dependent(1.0, vec![(f.clone(), f)]);
    match inverse_symbol(&s, 1) {
        Err(SymbolError::SingularLeading { gridpoint, positive, .. }) => {
            assert_eq!(gridpoint, 0);
            assert!(positive);
        }
        other => panic!("unexpected {other:?}"),
    }
}

#[test]
fn depth_errors_list_the_valid_maximum() {
    let s = xi_sq_plus_one(4);
    let t = xi_sq_plus_one(3);
    assert_eq!(
        star_product(s.as_log(), t.as_log(), 5).unwrap_err(),
        SymbolError::DepthTooLarge { requested: 5, max_valid: 3 }
    );
}

#[test]
fn commutator_with_first_order_symbol() {
    let xi = PolyhomSymbol::multiplier(c(1.0), &[s1(1.0), s1(0.0)], &[s1(-1.0), s1(0.0)], G, None).unwrap();
    let f = scalar_fn(|x| (2.0 * x).cos() + 0.5 * x.sin());
    let z = PeriodicMatrixFunction::zero(G, 1);
    let tau = x_dependent(0.0, vec![(f.clone(), f.clone()), (z.clone(), z)]);
    let com = commutator_symbol(xi.as_log(), tau.as_log(), 2).unwrap();
    assert!(com.component(0, 0).unwrap().max_norm() < 1e-13);
    let d = com.component(1, 0).unwrap();
    for k in 0..G {
        let x = grid_point(k, G);
        let fp = -2.0 * (2.0 * x).sin() + 0.5 * x.cos();
        let expect = Complex64::new(0.0, -fp);
        assert!((d.plus.sample(k)[(0, 0)] - expect).norm() < 1e-12);
        assert!((d.minus.sample(k)[(0, 0)] - expect).norm() < 1e-12);
    }
}

#[test]
fn scalar_and_constant_matrix_commutators() {
    let a = xi_sq_plus_one(4);
    let b = PolyhomSymbol::multiplier(c(-0.5), &vec![s1(2.0); 4], &vec![s1(3.0); 4], G, None).unwrap();
    let com = commutator_symbol(a.as_log(), b.as_log(), 4).unwrap();
    assert!(com.max_component_norm() < 1e-12);
    let p = CMat::from_row_slice(2, 2, &[c(1.0), c(2.0), c(3.0), c(4.0)]);
    let q = CMat::from_row_slice(2, 2, &[c(0.0), c(1.0), c(-1.0), c(2.0)]);
    let ap = PolyhomSymbol::multiplier(c(0.0), &[p.clone()], &[p.clone()], G, None).unwrap();
    let aq = PolyhomSymbol::multiplier(c(0.0), &[q.clone()], &[q.clone()], G, None).unwrap();
    let com = commutator_symbol(ap.as_log(), aq.as_log(), 1).unwrap();
    assert!(frob(&(com.component(0, 0).unwrap().plus.sample(0) - (&p * &q - &q * &p))) < 1e-14);
}

#[test]
fn homog_eval_examples() {
    let id = LogPolyhomSymbol::identity(G, 1, 3);
    assert!((homog_eval(&id, 1.0, -4.0)[(0, 0)] - 1.0).norm() < 1e-15);
    let s = xi_sq_plus_one(4);
    assert!((homog_eval(s.as_log(), 0.0, 3.0)[(0, 0)] - 10.0).norm() < 1e-15);
    let h = PolyhomSymbol::new(
        c(-1.0),
        vec![HomogComponent::new(c(-1.0), PeriodicMatrixFunction::constant(G, s1(1.0)), PeriodicMatrixFunction::constant(G, s1(1.0)))],
        None,
    )
    .unwrap();
    assert!((homog_eval(h.as_log(), 0.0, 2.0)[(0, 0)] - 0.5).norm() < 1e-15);
    assert_eq!(homog_eval(h.as_log(), 0.0, 0.25)[(0, 0)], c(0.0));
}

#[test]
fn log_type_adds_under_products() {
    let one = PeriodicMatrixFunction::constant(G, s1(1.0));
    let z = PeriodicMatrixFunction::zero(G, 1);
    // log|ξ| + 1
    let lg = LogPolyhomSymbol::new(
        c(0.0),
        vec![
            vec![HomogComponent::new(c(0.0), one.clone(), one.clone()), HomogComponent::new(c(0.0), one.clone(), one.clone())],
            vec![HomogComponent::new(c(-1.0), z.clone(), z.clone())],
        ],
        None,
    )
    .unwrap();
    let sq = star_product(&lg, &lg, 2).unwrap();
    assert_eq!(sq.log_type(), 2);
    let p = star_product(&lg, xi_sq_plus_one(2).as_log(), 2).unwrap();
    assert_eq!(p.log_type(), 1);
    for xi in [3.0, -5.0] {
        let l = f64::ln(f64::abs(xi)) + 1.0;
        assert!((sq.expansion_at(0.0, xi)[(0, 0)] - l * l).norm() < 1e-13);
    }
}

#[test]
fn exact_composition_of_multiplier_after_x_dependent_symbol() {
    // A = D (ξ ↦ ξ), b(x, ξ) = e^{ix}; (A b)(x, n) = (n + 1) e^{ix}.
    let a = ExactEvaluator::multiplier(|xi| s1(xi));
    let b = ExactEvaluator::grid(|_| (0..G).map(|k| CMat::from_element(1, 1, Complex64::from_polar(1.0, grid_point(k, G)))).collect());
    let xi = PolyhomSymbol::multiplier(c(1.0), &[s1(1.0)], &[s1(-1.0)], G, None).unwrap().with_exact(Some(a));
    let e = PeriodicMatrixFunction::from_fn(G, |x| CMat::from_element(1, 1, Complex64::from_polar(1.0, x)));
    let bs = x_dependent(0.0, vec![(e.clone(), e)]).with_exact(Some(b));
    let p = star_product(xi.as_log(), bs.as_log(), 1).unwrap();
    let vals = p.exact().unwrap().raw(4.0);
    for k in 0..G {
        let expect = Complex64::from_polar(5.0, grid_point(k, G));
        assert!((vals[k][(0, 0)] - expect).norm() < 1e-12);
    }
}

fn random_symbol(order: f64, depth: usize, coeffs: &[f64]) -> PolyhomSymbol {
    let comps: Vec<(PeriodicMatrixFunction, PeriodicMatrixFunction)> = (0..depth)
        .map(|j| {
            let a = coeffs[(3 * j) % coeffs.len()];
            let b = coeffs[(3 * j + 1) % coeffs.len()];
            let d = coeffs[(3 * j + 2) % coeffs.len()];
            let base = if j == 0 { 2.0 } else { 0.0 };
            (
                scalar_fn(move |x| base + a * x.sin() + b * (2.0 * x).cos()),
                scalar_fn(move |x| base + 1.0 + d * x.cos()),
            )
        })
        .collect();
    x_dependent(order, comps)
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn star_product_is_associative(
        a in -1.5f64..1.5, b in -1.5f64..1.5, cc in -1.5f64..1.5,
        coeffs in proptest::collection::vec(-0.3f64..0.3, 9),
    ) {
        let depth = 4;
        let s = random_symbol(a, depth, &coeffs);
        let t = random_symbol(b, depth, &coeffs[3..]);
        let r = random_symbol(cc, depth, &coeffs[1..]);
        let left = star_product(&star_product(s.as_log(), t.as_log(), depth).unwrap(), r.as_log(), depth).unwrap();
        let right = star_product(s.as_log(), &star_product(t.as_log(), r.as_log(), depth).unwrap(), depth).unwrap();
        prop_assert!(left.distance(&right).unwrap() < 1e-8);
        prop_assert!((left.order() - c(a + b + cc)).norm() == 0.0);
    }

    #[test]
    fn inverse_is_two_sided(a in -2.0f64..2.0, coeffs in proptest::collection::vec(-0.3f64..0.3, 9)) {
        let depth = 5;
        let s = random_symbol(a, depth, &coeffs);
        let inv = inverse_symbol(&s, depth).unwrap();
        let r = star_product(s.as_log(), inv.as_log(), depth).unwrap();
        let l = star_product(inv.as_log(), s.as_log(), depth).unwrap();
        prop_assert!(max_dev_from_identity(&r) < 1e-8);
        prop_assert!(max_dev_from_identity(&l) < 1e-8, "{} {}", max_dev_from_identity(&l), max_dev_from_identity(&r));
    }

    #[test]
    fn components_are_positively_homogeneous(d_re in -3.0f64..3.0, d_im in -1.0f64..1.0, xi in 0.3f64..4.0, neg in any::<bool>()) {
        let f = scalar_fn(|x| 1.0 + 0.3 * x.cos());
        let h = HomogComponent::new(Complex64::new(d_re, d_im), f.clone(), f.scale(c(-2.0)));
        let xi = if neg { -xi } else { xi };
        let base = h.eval_sample(3, xi)[(0, 0)];
        for t in [2.0f64, 5.0, 10.0] {
            let scaled = h.eval_sample(3, t * xi)[(0, 0)];
            let factor = (Complex64::new(d_re, d_im) * t.ln()).exp();
            prop_assert!((scaled - base * factor).norm() <= 1e-13 * scaled.norm().max(1.0));
        }
    }
}
