use psido_core::cutoff::Cutoff;
use psido_core::holo::{log_symbol, SpectralCut};
use psido_core::linalg::{c, CMat};
use psido_core::operators::{laplacian_power, shifted_laplacian_power, x_weighted_power};
use psido_core::special::{riemann_zeta, STIELTJES};
use psido_core::symbol::{ExactEvaluator, HomogComponent, PolyhomSymbol};
use psido_core::grid::PeriodicMatrixFunction;
use psido_core::star::star_product;
use psido_core::trace::{
    canonical_trace, cutoff_trace_density, residue, weighted_trace, weighted_trace_commutator, weighted_trace_direct,
    TraceError, TraceMode, TraceOptions,
};
use std::f64::consts::PI;

const G: usize = 64;

fn binom(a: f64, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (a - i as f64) / (i + 1) as f64)
}

/// `fp Σ_{n∈Z} (1+n²)^{−s/2}` by subtracting `K` binomial terms and summing them with `ζ`.
fn regularized_mode_sum(s: f64) -> f64 {
    let k_terms = 8;
    let n_max = 20000;
    let mut direct = 0.0;
    for n in (1..=n_max).rev() {
        let nf = n as f64;
        let mut model = 0.0;
        for k in 0..k_terms {
            model += binom(-s / 2.0, k) * nf.powf(-s - 2.0 * k as f64);
        }
        direct += (1.0 + nf * nf).powf(-s / 2.0) - model;
    }
    let mut zeta_part = 0.0;
    for k in 0..k_terms {
        let arg = s + 2.0 * k as f64;
        let z = if (arg - 1.0).abs() < 1e-12 { STIELTJES[0] } else { riemann_zeta(c(arg)).re };
        zeta_part += binom(-s / 2.0, k) * z;
    }
    1.0 + 2.0 * (direct + zeta_part)
}

fn gaussian(depth: usize) -> PolyhomSymbol {
    let comps: Vec<HomogComponent> = (0..depth)
        .map(|j| {
            let d = c(-10.0 - j as f64);
            HomogComponent::new(d, PeriodicMatrixFunction::zero(G, 1), PeriodicMatrixFunction::zero(G, 1))
        })
        .collect();
    let exact = ExactEvaluator::multiplier(|xi| CMat::from_element(1, 1, c((-xi * xi).exp())));
    PolyhomSymbol::new(c(-10.0), comps, Some(exact)).unwrap()
}

#[test]
fn residue_of_inverse_square_root() {
    let a = laplacian_power(-0.5, 8, G).unwrap();
    assert!((residue(a.as_log()) - 2.0).norm() < 1e-12);
}

#[test]
fn residue_vanishes_below_degree_minus_one() {
    let a = laplacian_power(-1.0, 3, G).unwrap();
    assert_eq!(residue(a.as_log()), c(0.0));
}

#[test]
fn residue_of_log_weight_vanishes_for_even_symbols() {
    let q = laplacian_power(0.5, 8, G).unwrap();
    let l = log_symbol(&q, SpectralCut::default(), 8).unwrap();
    assert!(residue(&l).norm() < 1e-10);
}

#[test]
fn gaussian_mode_sum_and_integral() {
    let s = gaussian(8);
    let tor = canonical_trace(s.as_log(), &TraceOptions::default()).unwrap();
    let direct: f64 = (-12i32..=12).map(|n| (-(n as f64).powi(2)).exp()).sum();
    assert!((tor.integral - direct).norm() < 1e-12);
    let cont = cutoff_trace_density(s.as_log(), &TraceOptions::default().with_mode(TraceMode::Continuous)).unwrap();
    let v = cont.values()[5];
    assert!((v - 1.0 / (2.0 * PI.sqrt())).norm() < 1e-12, "{v}");
}

#[test]
fn inverse_three_halves_power() {
    let s = laplacian_power(-1.5, 8, G).unwrap();
    let cont = cutoff_trace_density(s.as_log(), &TraceOptions::default().with_mode(TraceMode::Continuous)).unwrap();
    assert!((cont.values()[0] - 1.0 / PI).norm() < 1e-10, "{}", cont.values()[0]);
    assert!((cont.integral - 2.0).norm() < 1e-9);
    let tor = canonical_trace(s.as_log(), &TraceOptions::default()).unwrap();
    let n_max = 1_000_000;
    let mut direct = 0.0;
    for n in (1..=n_max).rev() {
        direct += (1.0 + (n as f64).powi(2)).powf(-1.5);
    }
    let nf = n_max as f64;
    let total = 1.0 + 2.0 * (direct + 0.5 / (nf * nf) - 0.5 / (nf * nf * nf));
    assert!((tor.integral - total).norm() < 1e-10, "{} vs {total}", tor.integral);
}

#[test]
fn canonical_trace_of_non_integer_order_matches_mode_sum() {
    let s = laplacian_power(-0.25, 8, G).unwrap();
    let tor = canonical_trace(s.as_log(), &TraceOptions::default()).unwrap();
    let oracle = regularized_mode_sum(0.5);
    assert!((tor.integral - oracle).norm() < 1e-9, "{} vs {oracle}", tor.integral);
}

#[test]
fn x_dependent_density_is_exact() {
    let f = |x: f64| 1.0 + 0.3 * x.cos();
    let s = x_weighted_power(f, -0.5, 6, G).unwrap();
    let r = canonical_trace(s.as_log(), &TraceOptions::default()).unwrap();
    let z = riemann_zeta(c(0.5)).re;
    for (x, v) in r.x_grid.iter().zip(r.values()) {
        assert!((v - f(*x) * 2.0 * z / (2.0 * PI)).norm() < 1e-10);
    }
    assert!((r.integral - 2.0 * z).norm() < 1e-10);
}

#[test]
fn cutoff_and_lambda_independence() {
    let s = laplacian_power(-0.25, 8, G).unwrap();
    let opts = TraceOptions::default();
    let base = canonical_trace(s.as_log(), &opts).unwrap().integral;
    let alt = canonical_trace(s.clone().with_cutoff(Cutoff::alternate()).as_log(), &opts).unwrap().integral;
    let lam = canonical_trace(s.as_log(), &opts.with_lambda(2000)).unwrap().integral;
    assert!((base - alt).norm() < 1e-12);
    assert!((base - lam).norm() < 1e-10);
}

#[test]
fn integer_order_with_residue_is_obstructed() {
    let s = laplacian_power(-0.5, 8, G).unwrap();
    assert!(matches!(canonical_trace(s.as_log(), &TraceOptions::default()), Err(TraceError::ResidueObstruction(_))));
    assert!(cutoff_trace_density(s.as_log(), &TraceOptions::default().accepting_obstruction()).is_ok());
}

#[test]
fn weighted_trace_of_inverse_square_root() {
    let a = laplacian_power(-0.5, 8, G).unwrap();
    let q = laplacian_power(0.5, 8, G).unwrap();
    let cut = SpectralCut::default();
    let opts = TraceOptions::default();
    let w = weighted_trace(a.as_log(), &q, cut, &opts).unwrap();
    let oracle = regularized_mode_sum(1.0);
    assert!((w.value - oracle).norm() < 1e-9, "{} vs {oracle}", w.value);
    let fit = weighted_trace_direct(a.as_log(), &q, cut, &opts).unwrap();
    assert!((fit.coeff(-1) - 2.0).norm() < 1e-6, "pole {}", fit.coeff(-1));
    assert!((fit.coeff(0) - w.value).norm() < 1e-5, "{} vs {}", fit.coeff(0), w.value);
}

#[test]
fn weighted_trace_of_identity_is_zeta_at_zero() {
    let i = PolyhomSymbol::identity(G, 1, 8);
    let cut = SpectralCut::default();
    let opts = TraceOptions::default();
    for q in [laplacian_power(0.5, 8, G).unwrap(), shifted_laplacian_power(2.0, c(1.0), 8, G).unwrap()] {
        let w = weighted_trace(i.as_log(), &q, cut, &opts).unwrap();
        assert!(w.value.norm() < 1e-9, "{}", w.value);
        let fit = weighted_trace_direct(i.as_log(), &q, cut, &opts).unwrap();
        assert!(fit.coeff(0).norm() < 1e-6, "{}", fit.coeff(0));
    }
}

#[test]
fn weight_change_is_local() {
    let cut = SpectralCut::default();
    let opts = TraceOptions::default();
    let q1 = laplacian_power(0.5, 8, G).unwrap();
    let q2 = shifted_laplacian_power(2.0, c(1.0), 8, G).unwrap();
    let l1 = log_symbol(&q1, cut, 8).unwrap();
    let l2 = log_symbol(&q2, cut, 8).unwrap();
    let diff_log = l2.scale(c(0.5)).sub(&l1).unwrap();
    for p in [-0.5, 0.25, 0.0] {
        let a = laplacian_power(p, 8, G).unwrap();
        let t1 = weighted_trace(a.as_log(), &q1, cut, &opts).unwrap().value;
        let t2 = weighted_trace(a.as_log(), &q2, cut, &opts).unwrap().value;
        let local = residue(&star_product(a.as_log(), &diff_log, 8).unwrap());
        assert!((t1 - t2 - local).norm() < 1e-7, "p = {p}: {} vs {local}", t1 - t2);
    }
}

#[test]
fn coboundary_for_x_dependent_pair() {
    let a = x_weighted_power(|x| 1.0 + 0.4 * (2.0 * x).sin() + 0.3 * x.cos(), 1.0, 8, G).unwrap();
    let b = x_weighted_power(|x| 0.5 * x.cos() + 0.2 * (2.0 * x).sin(), 0.0, 8, G).unwrap();
    let q = laplacian_power(0.5, 8, G).unwrap();
    let cut = SpectralCut::default();
    let opts = TraceOptions::default();
    let r = weighted_trace_commutator(a.as_log(), b.as_log(), &q, cut, &opts).unwrap();
    // res(A[B, log Q]) = (1/2π)∫ g f″ dx for A = g|ξ|, B = f.
    assert!((r.value + (-0.3 * 0.5 - 0.4 * 0.8) / 2.0).norm() < 1e-9, "{:?}", r);
    let ab = psido_core::star::commutator_symbol(a.as_log(), b.as_log(), 8).unwrap();
    let fit = weighted_trace_direct(&ab, &q, cut, &opts).unwrap();
    assert!((fit.coeff(0) - r.value).norm() < 1e-7);
}

#[test]
fn coboundary_vanishes_when_weight_is_an_argument() {
    let q = laplacian_power(0.5, 8, G).unwrap();
    let b = x_weighted_power(|x| 0.5 * x.cos(), 0.0, 8, G).unwrap();
    let r = weighted_trace_commutator(q.as_log(), b.as_log(), &q, SpectralCut::default(), &TraceOptions::default()).unwrap();
    assert!(r.value.norm() < 1e-9);
}

#[test]
fn weighted_trace_of_a_logarithm_has_a_double_pole() {
    let cut = SpectralCut::default();
    let opts = TraceOptions::default();
    let base = shifted_laplacian_power(2.0, c(1.0), 8, G).unwrap();
    let inv_sqrt = laplacian_power(-0.5, 8, G).unwrap();
    let la = star_product(inv_sqrt.as_log(), &log_symbol(&base, cut, 8).unwrap(), 8).unwrap();
    let q = laplacian_power(0.5, 8, G).unwrap();
    let w = weighted_trace(&la, &q, cut, &opts).unwrap();
    let fit = weighted_trace_direct(&la, &q, cut, &opts).unwrap();
    assert!(fit.coeff(-2).norm() > 1e-3);
    assert!((fit.coeff(0) - w.value).norm() < 1e-5, "{} vs {}", fit.coeff(0), w.value);
}

mod props {
    use super::*;
    use proptest::prelude::*;
    use psido_core::operators::x_dependent_symbol;
    use psido_core::star::commutator_symbol;

    fn trig_symbol(order: f64, amps: Vec<f64>, depth: usize) -> PolyhomSymbol {
        let mut comps: Vec<(Box<dyn Fn(f64) -> CMat>, Box<dyn Fn(f64) -> CMat>)> = Vec::new();
        for j in 0..depth {
            let (a, b) = (amps[2 * j % amps.len()], amps[(2 * j + 1) % amps.len()]);
            let lead = if j == 0 { 1.0 } else { 0.0 };
            let k = (j + 1) as f64;
            comps.push((
                Box::new(move |x: f64| CMat::from_element(1, 1, c(lead + a * (k * x).cos()))),
                Box::new(move |x: f64| CMat::from_element(1, 1, c(lead + b * (k * x).sin()))),
            ));
        }
        x_dependent_symbol(c(order), &comps, G).unwrap()
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(12))]

        #[test]
        fn residue_of_commutator_vanishes(
            amps in proptest::collection::vec(-0.4f64..0.4, 6),
            amps2 in proptest::collection::vec(-0.4f64..0.4, 6),
            a1 in 0i32..2, a2 in -1i32..1,
        ) {
            let s = trig_symbol(a1 as f64, amps, 6);
            let t = trig_symbol(a2 as f64, amps2, 6);
            let cm = commutator_symbol(s.as_log(), t.as_log(), 5).unwrap();
            prop_assert!(residue(&cm).norm() < 1e-8);
            let st = star_product(s.as_log(), t.as_log(), 5).unwrap();
            let ts = star_product(t.as_log(), s.as_log(), 5).unwrap();
            prop_assert!((residue(&st) - residue(&ts)).norm() < 1e-8);
        }
    }
}
