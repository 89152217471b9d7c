//! Verification suites: the fifteen acceptance criteria and the checks driven by a problem file.

use std::f64::consts::PI;
use std::fmt::Display;

use num_complex::Complex64;
use rayon::prelude::*;

use psido_core::anomaly::{
    auto_cut, det_q_anomaly, l_symbol, log_det_weighted, log_det_zeta_local, zeta_anomaly_local, AnomalyConfig,
    AnomalyError, CutOperator, Weight,
};
use psido_core::cutoff::Cutoff;
use psido_core::holo::{log_symbol, SpectralCut};
use psido_core::linalg::{c, CMat};
use psido_core::operators::{
    dirac_shift, laplacian_power, matrix_multiplier, perturbed_matrix_multiplier, shifted_laplacian_power, x_weighted_power,
};
use psido_core::series::AsymSeries;
use psido_core::star::{commutator_symbol, star_classical, star_product};
use psido_core::symbol::{ExactEvaluator, LogPolyhomSymbol, PolyhomSymbol};
use psido_core::trace::{
    canonical_trace, residue, weighted_trace, weighted_trace_commutator, weighted_trace_direct, weighted_trace_with_log,
    TraceOptions,
};
use psido_oracle::{
    anomaly_spectral, det_zeta_spectral, log_det_zeta_spectral, zeta, zeta_at_zero, MultiplierOperator, OracleConfig,
};

use crate::config::{BuiltOperator, ProblemConfig, Settings};
use crate::report::Check;

/// Environment variable capping the worker threads of a suite.
pub const THREADS_ENV: &str = "PSIDO_THREADS";

#[derive(Clone, Copy, Debug, PartialEq, Eq, clap::ValueEnum)]
pub enum Suite {
    Residues,
    Traces,
    Determinants,
    Anomaly,
    All,
}

impl Suite {
    pub fn name(self) -> &'static str {
        match self {
            Suite::Residues => "residues",
            Suite::Traces => "traces",
            Suite::Determinants => "determinants",
            Suite::Anomaly => "anomaly",
            Suite::All => "all",
        }
    }

    /// Acceptance criteria run by the suite.
    pub fn criteria(self) -> Vec<u8> {
        match self {
            Suite::Residues => vec![1, 2, 7],
            Suite::Traces => vec![4, 5, 6, 14, 15],
            Suite::Determinants => vec![3, 12, 13],
            Suite::Anomaly => vec![8, 9, 10, 11],
            Suite::All => (1..=15).collect(),
        }
    }
}

/// Thread pool sized by `PSIDO_THREADS` when set.
pub fn thread_pool() -> rayon::ThreadPool {
    let mut b = rayon::ThreadPoolBuilder::new();
    if let Some(n) = std::env::var(THREADS_ENV).ok().and_then(|v| v.parse::<usize>().ok()).filter(|n| *n > 0) {
        b = b.num_threads(n);
    }
    b.build().expect("thread pool")
}

pub fn criterion_title(id: u8) -> &'static str {
    match id {
        1 => "residue closed form and zeta pole",
        2 => "residue of log Q against q zeta_Q(0)",
        3 => "zeta determinant of 1 - Laplacian",
        4 => "weighted trace: defect formula against direct finite part",
        5 => "weighted trace of a commutator",
        6 => "change of weight",
        7 => "residue of L(A,B); L for commuting pairs",
        8 => "tr^Q(L) by tau-quadrature against the defect formula",
        9 => "tr^Q(L) insensitive to order -2 perturbations of A",
        10 => "zeta anomaly, commuting pair",
        11 => "zeta anomaly, noncommuting pairs",
        12 => "zeta against weighted determinant",
        13 => "determinants under a change of spectral cut",
        14 => "t-derivative commutes with res, TR and tr^Q",
        15 => "cut-off function and Lambda independence",
        _ => "unknown criterion",
    }
}

/// Runs the acceptance criteria in parallel; checks come back in criterion order.
pub fn run_criteria(ids: &[u8], s: &Settings) -> Vec<(u8, Vec<Check>)> {
    thread_pool().install(|| ids.par_iter().map(|&id| (id, run_criterion(id, s))).collect())
}

pub fn run_criterion(id: u8, s: &Settings) -> Vec<Check> {
    match id {
        1 => crit1(s),
        2 => crit2(s),
        3 => crit3(s),
        4 => crit4(s),
        5 => crit5(s),
        6 => crit6(s),
        7 => crit7(s),
        8 => crit8(s),
        9 => crit9(s),
        10 => crit10(s),
        11 => crit11(s),
        12 => crit12(s),
        13 => crit13(s),
        14 => crit14(s),
        15 => crit15(s),
        _ => vec![Check::failed(format!("c{id:02}"), "unknown criterion", 0.0, "no such criterion")],
    }
}

/// Turns a failed computation into a failing check.
fn guard(id: &str, statement: &str, tol: f64, f: impl FnOnce() -> Result<Check, String>) -> Check {
    f().unwrap_or_else(|e| Check::failed(id, statement, tol, e))
}

fn e(err: impl Display) -> String {
    err.to_string()
}

// Operator corpus.

fn lap(p: f64, s: &Settings) -> PolyhomSymbol {
    laplacian_power(p, s.depth, s.grid).expect("(1-Δ)^p")
}

fn shifted(cc: f64, p: f64, s: &Settings) -> PolyhomSymbol {
    shifted_laplacian_power(cc, c(p), s.depth, s.grid).expect("(c-Δ)^p")
}

fn dirac(cc: f64, s: &Settings) -> PolyhomSymbol {
    dirac_shift(c(cc), s.depth, s.grid).expect("D + c")
}

fn mat(v: [f64; 4]) -> CMat {
    CMat::from_row_slice(2, 2, &[c(v[0]), c(v[1]), c(v[2]), c(v[3])])
}

fn perturbed(order: f64, lead: [f64; 4], pert: [f64; 4], eps: f64, s: &Settings) -> PolyhomSymbol {
    perturbed_matrix_multiplier(order, &mat(lead), &mat(pert), eps, s.depth, s.grid).expect("2x2 multiplier")
}

fn sqrt_lap_2x2(s: &Settings) -> PolyhomSymbol {
    perturbed(1.0, [1.0, 0.0, 0.0, 1.0], [0.0; 4], 0.0, s)
}

fn with_auto_cut(sym: PolyhomSymbol) -> Result<CutOperator, String> {
    let cut = auto_cut(&sym, 512).map_err(e)?;
    Ok(CutOperator::new(sym, cut))
}

fn at_pi(sym: PolyhomSymbol) -> CutOperator {
    CutOperator::new(sym, SpectralCut::new(PI))
}

fn oracle_op(op: &CutOperator) -> Result<MultiplierOperator, String> {
    MultiplierOperator::new(op.symbol.clone(), op.cut).map_err(e)
}

type PairSpec = (f64, [f64; 4], [f64; 4], f64, [f64; 4], [f64; 4]);

/// Noncommuting `2×2` pairs `(order_A, lead_A, pert_A, order_B, lead_B, pert_B)` perturbed by `eps`.
const PAIR_FAMILIES: [PairSpec; 2] = [
    (1.0, [2.0, 0.5, 0.3, 1.0], [0.0, 1.0, -1.0, 0.5], 1.0, [1.5, -0.2, 0.4, 1.0], [0.3, 0.0, 0.7, -0.4]),
    (1.0, [1.0, 0.4, -0.2, 2.0], [0.5, 0.0, 0.2, 0.1], 2.0, [1.2, 0.3, 0.1, 0.8], [0.0, 0.6, -0.3, 0.0]),
];

fn noncommuting_pair(family: usize, eps: f64, s: &Settings) -> Result<(CutOperator, CutOperator), String> {
    let (oa, la, pa, ob, lb, pb) = PAIR_FAMILIES[family];
    Ok((with_auto_cut(perturbed(oa, la, pa, eps, s))?, with_auto_cut(perturbed(ob, lb, pb, eps, s))?))
}

fn anomaly_cfg(s: &Settings) -> AnomalyConfig {
    s.anomaly()
}

fn trace_opts(s: &Settings) -> TraceOptions {
    s.trace()
}

fn oracle_cfg(s: &Settings) -> OracleConfig {
    s.oracle()
}

// Residues.

fn crit1(s: &Settings) -> Vec<Check> {
    let stmt = "res((1-Δ)^(-1/2)) = 2";
    let r = residue(lap(-0.5, s).as_log());
    let closed = Check::absolute("c01.residue", stmt, r, c(2.0), 1e-8);
    let pole_stmt = "Res_{s=1} Σ_n (1+n²)^(-s/2) = res((1-Δ)^(-1/2))";
    let pole = guard("c01.zeta_pole", pole_stmt, 1e-6, || {
        let a = MultiplierOperator::new(lap(0.5, s), SpectralCut::new(PI)).map_err(e)?;
        let cfg = oracle_cfg(s);
        // (s−1)ζ(s) averaged over 1 ± δ is R + O(δ²); one Richardson step removes the δ² term.
        let sym = |d: f64| -> Result<Complex64, String> {
            let up = zeta(&a, c(1.0 + d), &cfg).map_err(e)?.value * d;
            let down = zeta(&a, c(1.0 - d), &cfg).map_err(e)?.value * (-d);
            Ok(0.5 * (up + down))
        };
        let d = 1e-2;
        let pole = (4.0 * sym(d / 2.0)? - sym(d)?) / 3.0;
        Ok(Check::absolute("c01.zeta_pole", pole_stmt, pole, r, 1e-6))
    });
    vec![closed, pole]
}

fn crit2(s: &Settings) -> Vec<Check> {
    let stmt = "res(log Q) + q ζ_Q(0) = 0";
    let cases: Vec<(&str, PolyhomSymbol)> = vec![
        ("sqrt_one_minus_laplacian", lap(0.5, s)),
        ("two_minus_laplacian", shifted(2.0, 1.0, s)),
        ("positive_2x2", perturbed(1.0, [2.0, 0.5, 0.5, 1.0], [0.3, 0.1, 0.1, -0.2], 0.5, s)),
    ];
    cases
        .into_iter()
        .map(|(name, q)| {
            let id = format!("c02.{name}");
            guard(&id, stmt, 1e-6, || {
                let cut = SpectralCut::new(PI);
                let order = q.order().re;
                let r = residue(&log_symbol(&q, cut, s.depth).map_err(e)?);
                let z0 = zeta_at_zero(&MultiplierOperator::new(q, cut).map_err(e)?, &oracle_cfg(s)).map_err(e)?;
                Ok(Check::absolute(&id, stmt, r, -order * z0, 1e-6).with_note(format!("res(log Q) = {r}")))
            })
        })
        .collect()
}

fn crit7(s: &Settings) -> Vec<Check> {
    let cfg = anomaly_cfg(s);
    let stmt = "res(log AB - log A - log B) = 0";
    let mut out = Vec::new();
    for family in 0..PAIR_FAMILIES.len() {
        for eps in [0.1, 0.2, 0.3, 0.4, 0.5] {
            let id = format!("c07.noncommuting.f{family}.eps{eps}");
            out.push(guard(&id, stmt, 1e-7, || {
                let (a, b) = noncommuting_pair(family, eps, s)?;
                let l = l_symbol(&a, &b, None, &cfg).map_err(e)?;
                Ok(Check::vanishes(&id, stmt, residue(l.as_log()), 1e-7)
                    .with_note(format!("max |L component| = {:.3e}", l.max_component_norm())))
            }));
        }
    }
    let cstmt = "L(A,B) = 0 componentwise for commuting A, B";
    let commuting: Vec<(&str, PolyhomSymbol, PolyhomSymbol)> = vec![
        ("dirac_sqrt_laplacian", dirac(0.3, s), lap(0.5, s)),
        ("laplacian_powers", lap(0.5, s), lap(1.0, s)),
        ("shifted_laplacians", shifted(2.0, 1.0, s), lap(0.5, s)),
        ("dirac_shifted_sqrt", dirac(0.3, s), shifted(2.0, 0.5, s)),
        (
            "diagonal_2x2",
            perturbed(1.0, [2.0, 0.0, 0.0, 1.0], [0.5, 0.0, 0.0, -0.3], 0.4, s),
            perturbed(1.0, [1.0, 0.0, 0.0, 3.0], [0.2, 0.0, 0.0, 0.7], 0.4, s),
        ),
    ];
    for (name, a, b) in commuting {
        let id = format!("c07.commuting.{name}");
        out.push(guard(&id, cstmt, 1e-8, || {
            let (a, b) = (with_auto_cut(a)?, with_auto_cut(b)?);
            let l = l_symbol(&a, &b, None, &cfg).map_err(e)?;
            Ok(Check::vanishes(&id, cstmt, c(l.max_component_norm()), 1e-8))
        }));
    }
    out
}

// Traces.

fn crit4(s: &Settings) -> Vec<Check> {
    let stmt = "tr^Q(A) from the defect formula = fp_{z=0} TR(A Q^(-z))";
    let opts = trace_opts(s);
    let scalar_q = lap(0.5, s);
    let matrix_q = sqrt_lap_2x2(s);
    let corpus: Vec<(&str, PolyhomSymbol, bool)> = vec![
        ("inverse_sqrt_laplacian", lap(-0.5, s), false),
        ("laplacian_quarter_power", lap(-0.25, s), false),
        ("laplacian_three_quarter_power", lap(-0.75, s), false),
        ("inverse_two_minus_laplacian", shifted(2.0, -1.0, s), false),
        ("shifted_inverse_sqrt", shifted(3.0, -0.5, s), false),
        ("dirac_shift", dirac(0.3, s), false),
        ("x_weighted_inverse_sqrt", x_weighted_power(|x| 1.0 + 0.3 * x.cos(), -1.0, s.depth, s.grid).expect("x-weighted"), false),
        ("matrix_order_minus_one", perturbed(-1.0, [2.0, 0.5, 0.3, 1.0], [0.0, 1.0, -1.0, 0.5], 0.3, s), true),
        ("matrix_order_minus_half", perturbed(-0.5, [1.0, 0.4, -0.2, 2.0], [0.5, 0.0, 0.2, 0.1], 0.3, s), true),
        ("matrix_order_zero", perturbed(0.0, [1.5, -0.2, 0.4, 1.0], [0.3, 0.0, 0.7, -0.4], 0.3, s), true),
    ];
    corpus
        .into_par_iter()
        .map(|(name, a, matrix)| {
            let id = format!("c04.{name}");
            guard(&id, stmt, 1e-5, || {
                let q = if matrix { &matrix_q } else { &scalar_q };
                let cut = SpectralCut::new(PI);
                let w = weighted_trace(a.as_log(), q, cut, &opts).map_err(e)?.value;
                let fit = weighted_trace_direct(a.as_log(), q, cut, &opts).map_err(e)?;
                Ok(Check::absolute(&id, stmt, w, fit.coeff(0), 1e-5))
            })
        })
        .collect()
}

fn crit5(s: &Settings) -> Vec<Check> {
    let opts = trace_opts(s);
    let cut = SpectralCut::new(PI);
    let a = x_weighted_power(|x| 1.0 + 0.4 * (2.0 * x).sin() + 0.3 * x.cos(), 1.0, s.depth, s.grid).expect("A");
    let b = x_weighted_power(|x| 0.5 * x.cos() + 0.2 * (2.0 * x).sin(), 0.0, s.depth, s.grid).expect("B");
    let q = lap(0.5, s);
    let mut out = Vec::new();
    let stmt = "tr^Q([A,B]) = -(1/q) res(A [B, log Q]) = (1/q) res(B [A, log Q])";
    match weighted_trace_commutator(a.as_log(), b.as_log(), &q, cut, &opts) {
        Ok(r) => {
            out.push(Check::absolute("c05.swapped_residue", stmt, r.value, r.swapped, 1e-7));
            out.push(Check::absolute("c05.defect_formula", stmt, r.value, r.weighted, 1e-7));
            out.push(guard("c05.direct", stmt, 1e-7, || {
                let ab = commutator_symbol(a.as_log(), b.as_log(), s.depth).map_err(e)?;
                let fit = weighted_trace_direct(&ab, &q, cut, &opts).map_err(e)?;
                Ok(Check::absolute("c05.direct", stmt, fit.coeff(0), r.value, 1e-7))
            }));
        }
        Err(err) => out.push(Check::failed("c05.residues", stmt, 1e-7, err)),
    }
    let zstmt = "tr^Q([Q,B]) = 0";
    let b2 = x_weighted_power(|x| 0.5 * x.cos(), 0.0, s.depth, s.grid).expect("B");
    out.push(guard("c05.weight_as_argument", zstmt, 1e-9, || {
        let r = weighted_trace_commutator(q.as_log(), b2.as_log(), &q, cut, &opts).map_err(e)?;
        Ok(Check::vanishes("c05.weight_as_argument", zstmt, r.value, 1e-9))
    }));
    out
}

fn crit6(s: &Settings) -> Vec<Check> {
    let stmt = "tr^Q1(A) - tr^Q2(A) = res(A (log Q2/q2 - log Q1/q1))";
    let opts = trace_opts(s);
    let cut = SpectralCut::new(PI);
    let pairs: Vec<(&str, PolyhomSymbol, PolyhomSymbol)> = vec![
        ("sqrt_laplacian_vs_two_minus_laplacian", lap(0.5, s), shifted(2.0, 1.0, s)),
        ("sqrt_laplacian_vs_quarter_power", lap(0.5, s), shifted(3.0, 0.25, s)),
        ("two_minus_laplacian_vs_shifted_cube_root", shifted(2.0, 1.0, s), shifted(0.5, 1.5, s)),
    ];
    let operands: Vec<(&str, PolyhomSymbol)> = vec![
        ("laplacian_quarter_power", lap(0.25, s)),
        ("sqrt_laplacian", lap(0.5, s)),
        ("x_weighted", x_weighted_power(|x| 1.0 + 0.3 * x.cos(), 1.0, s.depth, s.grid).expect("x-weighted")),
    ];
    let mut out = Vec::new();
    for (pname, q1, q2) in &pairs {
        for (aname, a) in &operands {
            let id = format!("c06.{pname}.{aname}");
            out.push(guard(&id, stmt, 1e-7, || {
                let (o1, o2) = (q1.order().re, q2.order().re);
                let l1 = log_symbol(q1, cut, s.depth).map_err(e)?;
                let l2 = log_symbol(q2, cut, s.depth).map_err(e)?;
                let t1 = weighted_trace_with_log(a.as_log(), &l1, o1, &opts).map_err(e)?.value;
                let t2 = weighted_trace_with_log(a.as_log(), &l2, o2, &opts).map_err(e)?.value;
                let diff = l2.scale(c(1.0 / o2)).sub(&l1.scale(c(1.0 / o1))).map_err(e)?;
                let local = residue(&star_product(a.as_log(), &diff, s.depth).map_err(e)?);
                Ok(Check::absolute(&id, stmt, t1 - t2, local, 1e-7))
            }));
        }
    }
    out
}

/// `∂_t F(t)` at `t = 0` by the centered difference with one Richardson step.
fn derivative(h: f64, f: impl Fn(f64) -> Result<Complex64, String>) -> Result<Complex64, String> {
    let d1 = (f(h)? - f(-h)?) / (2.0 * h);
    let d2 = (f(h / 2.0)? - f(-h / 2.0)?) / h;
    Ok((4.0 * d2 - d1) / 3.0)
}

fn crit14(s: &Settings) -> Vec<Check> {
    let opts = trace_opts(s);
    let cut = SpectralCut::new(PI);
    let h = 1e-2;
    let mut out = Vec::new();

    // A_t = (c+t-Δ)^p has ∂_t A_t = p (c+t-Δ)^(p-1).
    let tr_stmt = "∂_t TR(A_t) = TR(∂_t A_t) for A_t = (1+t-Δ)^(-1/4)";
    out.push(guard("c14.canonical_trace", tr_stmt, 1e-5, || {
        let p = -0.25;
        let fd = derivative(h, |t| Ok(canonical_trace(shifted(1.0 + t, p, s).as_log(), &opts).map_err(e)?.integral))?;
        let exact = canonical_trace(shifted(1.0, p - 1.0, s).as_log(), &opts).map_err(e)?.integral * p;
        Ok(Check::absolute("c14.canonical_trace", tr_stmt, fd, exact, 1e-5))
    }));

    let res_stmt = "∂_t res(A_t) = res(∂_t A_t) at t = 1/2 for A_t = exp(t cos x)(1+sin x/2)|D|^(-1)";
    out.push(guard("c14.residue", res_stmt, 1e-5, || {
        let f = |t: f64| move |x: f64| ((0.5 + t) * x.cos()).exp() * (1.0 + 0.5 * x.sin());
        let sym = |t: f64| x_weighted_power(f(t), -1.0, s.depth, s.grid).map_err(e);
        let fd = derivative(h, |t| Ok(residue(sym(t)?.as_log())))?;
        let d = x_weighted_power(|x| x.cos() * (0.5 * x.cos()).exp() * (1.0 + 0.5 * x.sin()), -1.0, s.depth, s.grid).map_err(e)?;
        Ok(Check::absolute("c14.residue", res_stmt, fd, residue(d.as_log()), 1e-5))
    }));

    let w_stmt = "∂_t tr^Q(A_t) = tr^Q(∂_t A_t) for A_t = (1+t-Δ)^(-1/2), Q = (1-Δ)^(1/2)";
    out.push(guard("c14.weighted_trace", w_stmt, 1e-5, || {
        let q = lap(0.5, s);
        let p = -0.5;
        let fd = derivative(h, |t| Ok(weighted_trace(shifted(1.0 + t, p, s).as_log(), &q, cut, &opts).map_err(e)?.value))?;
        let exact = weighted_trace(shifted(1.0, p - 1.0, s).as_log(), &q, cut, &opts).map_err(e)?.value * p;
        Ok(Check::absolute("c14.weighted_trace", w_stmt, fd, exact, 1e-5))
    }));

    let m_stmt = "∂_t tr^Q(A_t) = tr^Q(∂_t A_t) for A_t = (1-Δ)^(-1/2)(M + t N)";
    out.push(guard("c14.weighted_trace_2x2", m_stmt, 1e-5, || {
        let q = sqrt_lap_2x2(s);
        let (m, n) = ([2.0, 0.5, 0.3, 1.0], [0.2, -0.1, 0.4, 0.3]);
        let at = |t: f64| {
            let v: Vec<f64> = m.iter().zip(&n).map(|(a, b)| a + t * b).collect();
            perturbed(-1.0, [v[0], v[1], v[2], v[3]], [0.0; 4], 0.0, s)
        };
        let fd = derivative(h, |t| Ok(weighted_trace(at(t).as_log(), &q, cut, &opts).map_err(e)?.value))?;
        let exact = weighted_trace(perturbed(-1.0, n, [0.0; 4], 0.0, s).as_log(), &q, cut, &opts).map_err(e)?.value;
        Ok(Check::absolute("c14.weighted_trace_2x2", m_stmt, fd, exact, 1e-5))
    }));
    out
}

fn crit15(s: &Settings) -> Vec<Check> {
    let opts = trace_opts(s);
    let doubled = opts.with_lambda(2 * opts.lambda);
    let cut = SpectralCut::new(PI);
    let tol = 1e-7;
    let mut out = Vec::new();

    let outputs: Vec<(&str, Box<dyn Fn(Cutoff, &TraceOptions) -> Result<Complex64, String> + Send + Sync>)> = vec![
        (
            "canonical_trace",
            Box::new(|chi, o| Ok(canonical_trace(lap(-0.25, s).with_cutoff(chi).as_log(), o).map_err(e)?.integral)),
        ),
        (
            "canonical_trace_x_dependent",
            Box::new(|chi, o| {
                let a = x_weighted_power(|x| 1.0 + 0.3 * x.cos(), -0.5, s.depth, s.grid).map_err(e)?;
                Ok(canonical_trace(a.with_cutoff(chi).as_log(), o).map_err(e)?.integral)
            }),
        ),
        (
            "weighted_trace",
            Box::new(|chi, o| Ok(weighted_trace(lap(-0.5, s).with_cutoff(chi).as_log(), &lap(0.5, s), cut, o).map_err(e)?.value)),
        ),
        (
            "log_det_zeta",
            Box::new(|chi, o| {
                let a = at_pi(shifted(1.0, 1.0, s).with_cutoff(chi));
                let cfg = AnomalyConfig { trace: *o, ..anomaly_cfg(s) };
                Ok(log_det_zeta_local(&a, &cfg).map_err(e)?.log_det)
            }),
        ),
        (
            "log_det_weighted",
            Box::new(|chi, o| {
                let a = at_pi(shifted(2.0, 1.0, s).with_cutoff(chi));
                let q = at_pi(lap(0.5, s));
                let cfg = AnomalyConfig { trace: *o, ..anomaly_cfg(s) };
                Ok(log_det_weighted(&a, &q, &cfg).map_err(e)?.value)
            }),
        ),
    ];
    for (name, f) in &outputs {
        let base = f(Cutoff::standard(), &opts);
        let chi_stmt = format!("{name} unchanged under the alternate cut-off function");
        let lam_stmt = format!("{name} unchanged when Lambda doubles");
        match base {
            Ok(b) => {
                let id = format!("c15.{name}.cutoff");
                out.push(guard(&id, &chi_stmt, tol, || Ok(Check::absolute(&id, &chi_stmt, f(Cutoff::alternate(), &opts)?, b, tol))));
                let id = format!("c15.{name}.lambda");
                out.push(guard(&id, &lam_stmt, tol, || Ok(Check::absolute(&id, &lam_stmt, f(Cutoff::standard(), &doubled)?, b, tol))));
            }
            Err(err) => out.push(Check::failed(format!("c15.{name}"), chi_stmt, tol, err)),
        }
    }
    out
}

// Determinants.

fn crit3(s: &Settings) -> Vec<Check> {
    let stmt = "det_ζ(1-Δ) = 4 sinh²(π)";
    let expect = c(4.0 * PI.sinh().powi(2));
    let a = shifted(1.0, 1.0, s);
    let spectral = guard("c03.spectral", stmt, 1e-6, || {
        let op = MultiplierOperator::new(a.clone(), SpectralCut::new(PI)).map_err(e)?;
        Ok(Check::relative("c03.spectral", stmt, det_zeta_spectral(&op, &oracle_cfg(s)).map_err(e)?, expect, 1e-6))
    });
    let local = guard("c03.local", stmt, 1e-4, || {
        let d = log_det_zeta_local(&at_pi(a.clone()), &anomaly_cfg(s)).map_err(e)?;
        Ok(Check::relative("c03.local", stmt, d.log_det.exp(), expect, 1e-4))
    });
    vec![spectral, local]
}

fn crit12(s: &Settings) -> Vec<Check> {
    let stmt = "log det_ζ(A) - log det^Q(A) + res[(log A - (a/q) log Q)²]/(2a) = 0";
    let cfg = anomaly_cfg(s);
    let pairs: Vec<(&str, PolyhomSymbol, PolyhomSymbol)> = vec![
        ("one_minus_laplacian.two_minus_laplacian_sqrt", shifted(1.0, 1.0, s), shifted(2.0, 0.5, s)),
        ("two_minus_laplacian.sqrt_laplacian", shifted(2.0, 1.0, s), lap(0.5, s)),
        ("positive_2x2.sqrt_laplacian", perturbed(1.0, [2.0, 0.5, 0.5, 1.0], [0.3, 0.1, 0.1, -0.2], 0.5, s), lap(0.5, s)),
    ];
    pairs
        .into_par_iter()
        .flat_map(|(name, a, q)| {
            let (a, q) = (at_pi(a), at_pi(q));
            let id = format!("c12.{name}");
            let lid = format!("c12.{name}.local");
            let run = || -> Result<Vec<Check>, String> {
                let la = a.log(cfg.depth).map_err(e)?;
                let wq = Weight::of(&q, cfg.depth).and_then(|w| w.acting_on(la.rank())).map_err(e)?;
                let diff = la.sub(&wq.log_q.scale(c(a.order() / wq.q))).map_err(e)?;
                let sq = star_product(&diff, &diff, cfg.depth).map_err(e)?;
                let local_term = residue(&sq) / (2.0 * a.order());
                // Both determinants by routes independent of the residue formulas.
                let z = log_det_zeta_spectral(&oracle_op(&a)?, &oracle_cfg(s)).map_err(e)?;
                let q_lifted = if a.symbol.rank() == q.symbol.rank() {
                    q.symbol.clone()
                } else {
                    q.symbol.as_log().tensor_identity(a.symbol.rank()).and_then(|l| l.to_classical(0.0)).map_err(e)?
                };
                let w = weighted_trace_direct(&la, &q_lifted, q.cut, &cfg.trace).map_err(e)?.coeff(0);
                let zl = log_det_zeta_local(&a, &cfg).map_err(e)?.log_det;
                let wl = log_det_weighted(&a, &q, &cfg).map_err(e)?.value;
                Ok(vec![
                    Check::vanishes(&id, stmt, z - w + local_term, 1e-5)
                        .with_note(format!("spectral log det_ζ = {z}, direct log det^Q = {w}")),
                    Check::vanishes(&lid, stmt, zl - wl + local_term, 1e-5)
                        .with_note(format!("local log det_ζ = {zl}, defect log det^Q = {wl}")),
                ])
            };
            run().unwrap_or_else(|err| vec![Check::failed(&id, stmt, 1e-5, err)])
        })
        .collect()
}

fn crit13(s: &Settings) -> Vec<Check> {
    let tol = 1e-9;
    let cfg = anomaly_cfg(s);
    let ocfg = oracle_cfg(s);
    let mut out = Vec::new();
    // (operator, reference cut, alternative cuts inside the same eigenvalue-free cone)
    let cases: Vec<(&str, PolyhomSymbol, f64, Vec<f64>)> = vec![
        ("one_minus_laplacian", shifted(1.0, 1.0, s), PI, vec![0.6 * PI, 1.4 * PI]),
        ("dirac_shift", dirac(0.3, s), 0.5 * PI, vec![0.3 * PI, 0.8 * PI]),
    ];
    for (name, sym, theta0, thetas) in &cases {
        let stmt = format!("log det_ζ({name}) independent of the cut within the cone");
        let base_local = log_det_zeta_local(&CutOperator::new(sym.clone(), SpectralCut::new(*theta0)), &cfg);
        let base_oracle = MultiplierOperator::new(sym.clone(), SpectralCut::new(*theta0))
            .map_err(e)
            .and_then(|op| log_det_zeta_spectral(&op, &ocfg).map_err(e));
        for (k, theta) in thetas.iter().enumerate() {
            let id = format!("c13.{name}.local.{k}");
            out.push(guard(&id, &stmt, tol, || {
                let b = base_local.as_ref().map_err(e)?.log_det;
                let v = log_det_zeta_local(&CutOperator::new(sym.clone(), SpectralCut::new(*theta)), &cfg).map_err(e)?.log_det;
                Ok(Check::absolute(&id, &stmt, v, b, tol).with_note(format!("cut {theta} against {theta0}")))
            }));
            let id = format!("c13.{name}.spectral.{k}");
            out.push(guard(&id, &stmt, tol, || {
                let b = base_oracle.clone()?;
                let op = MultiplierOperator::new(sym.clone(), SpectralCut::new(*theta)).map_err(e)?;
                let v = log_det_zeta_spectral(&op, &ocfg).map_err(e)?;
                Ok(Check::absolute(&id, &stmt, v, b, tol).with_note(format!("cut {theta} against {theta0}")))
            }));
        }
    }
    let stmt = "log det^Q(A) independent of the cuts of A and Q within their cones";
    let a = shifted(2.0, 1.0, s);
    let q = lap(0.5, s);
    let det = |ta: f64, tq: f64| -> Result<Complex64, String> {
        let a = CutOperator::new(a.clone(), SpectralCut::new(ta));
        let q = CutOperator::new(q.clone(), SpectralCut::new(tq));
        Ok(log_det_weighted(&a, &q, &cfg).map_err(e)?.value)
    };
    for (k, (ta, tq)) in [(0.6 * PI, PI), (PI, 1.4 * PI)].iter().enumerate() {
        let id = format!("c13.weighted.{k}");
        out.push(guard(&id, stmt, tol, || Ok(Check::absolute(&id, stmt, det(*ta, *tq)?, det(PI, PI)?, tol))));
    }
    out
}

// Anomaly.

fn crit8(s: &Settings) -> Vec<Check> {
    let stmt = "tr^Q(L(A,B)) by τ-quadrature = tr^Q(L(A,B)) by the defect formula";
    let cfg = anomaly_cfg(s);
    // Multiplier pairs have tr L(n) = 0 on every mode, so a scalar weight gives tr^Q(L) = 0;
    // Q = A is a second non-scalar weight with a nonzero value.
    let cases: Vec<(&str, u8)> = vec![("weight_b", 0), ("weight_sqrt_laplacian", 1), ("weight_a", 2)];
    cases
        .into_iter()
        .map(|(name, which)| {
            let id = format!("c08.{name}");
            guard(&id, stmt, 1e-5, || {
                let (a, b) = noncommuting_pair(0, 0.4, s)?;
                let q = match which {
                    0 => b.clone(),
                    1 => at_pi(lap(0.5, s)),
                    _ => a.clone(),
                };
                match det_q_anomaly(&a, &b, &q, None, &cfg) {
                    Ok(r) => Ok(Check::absolute(&id, stmt, r.path.value, r.defect, 1e-5)
                        .with_note(format!("τ refinement change {:.3e}", r.path.refinement_change))),
                    Err(AnomalyError::Mismatch { lhs, rhs, .. }) => Ok(Check::absolute(&id, stmt, rhs, lhs, 1e-5)),
                    Err(err) => Err(e(err)),
                }
            })
        })
        .collect()
}

/// `I + t (1-Δ)^(-1) M` as a `2×2` multiplier.
fn identity_plus_order_minus_two(t: f64, m: [f64; 4], s: &Settings) -> Result<PolyhomSymbol, String> {
    let len = s.depth + 2;
    let mm = mat(m);
    let side = |sign: f64| -> Result<Vec<Vec<AsymSeries>>, String> {
        let xi = AsymSeries::variable(c(sign), len);
        let inv = xi.mul(&xi).add(&AsymSeries::constant(c(1.0), len)).map_err(e)?.inv().map_err(e)?;
        let mut rows = Vec::new();
        for i in 0..2 {
            let mut row = Vec::new();
            for j in 0..2 {
                let mut entry = inv.scale(mm[(i, j)] * t);
                if i == j {
                    entry = AsymSeries::constant(c(1.0), len).add(&entry).map_err(e)?;
                }
                row.push(entry);
            }
            rows.push(row);
        }
        Ok(rows)
    };
    let (plus, minus) = (side(1.0)?, side(-1.0)?);
    let exact = ExactEvaluator::multiplier(move |xi| CMat::identity(2, 2) + &mm * c(t / (1.0 + xi * xi)));
    matrix_multiplier(&plus, &minus, s.depth, s.grid, Some(exact)).map_err(e)
}

fn crit9(s: &Settings) -> Vec<Check> {
    let stmt = "∂_t tr^Q(L(A(1+tS),B)) = 0 at t = 0 for S of order -2";
    let cfg = anomaly_cfg(s);
    let id = "c09.order_minus_two_perturbation";
    let check = guard(id, stmt, 1e-5, || {
        let (a, b) = noncommuting_pair(0, 0.4, s)?;
        let wb = Weight::of(&b, cfg.depth).map_err(e)?;
        let m = [0.7, -0.4, 0.5, 1.1];
        let trql = |t: f64| -> Result<Complex64, String> {
            let sym = star_classical(&a.symbol, &identity_plus_order_minus_two(t, m, s)?, cfg.depth).map_err(e)?;
            let at = CutOperator::new(sym, a.cut);
            let l = l_symbol(&at, &b, None, &cfg).map_err(e)?;
            Ok(weighted_trace_with_log(l.as_log(), &wb.log_q, wb.q, &cfg.trace).map_err(e)?.value)
        };
        let d = derivative(1e-2, trql)?;
        // Control: an order -1 perturbation does move tr^Q(L).
        let control = derivative(1e-2, |t| {
            let sym = star_classical(&a.symbol, &perturbed(0.0, [1.0, 0.0, 0.0, 1.0], m, t, s), cfg.depth).map_err(e)?;
            let l = l_symbol(&CutOperator::new(sym, a.cut), &b, None, &cfg).map_err(e)?;
            Ok(weighted_trace_with_log(l.as_log(), &wb.log_q, wb.q, &cfg.trace).map_err(e)?.value)
        })?;
        Ok(Check::vanishes(id, stmt, d, 1e-5).with_note(format!("order -1 perturbation gives {control}")))
    });
    vec![check]
}

fn crit10(s: &Settings) -> Vec<Check> {
    let cfg = anomaly_cfg(s);
    let ocfg = oracle_cfg(s);
    let stmt = "log M_ζ(D+0.3, (1-Δ)^(1/2)) local = spectral";
    let fstmt = "log M_ζ = ab/(2(a+b)) res[(log A/a - log B/b)²] for commuting A, B";
    let run = || -> Result<Vec<Check>, String> {
        let a = with_auto_cut(dirac(0.3, s))?;
        let b = with_auto_cut(lap(0.5, s))?;
        let r = zeta_anomaly_local(&a, &b, None, &cfg).map_err(e)?;
        let spectral = anomaly_spectral(&oracle_op(&a)?, &oracle_op(&b)?, SpectralCut::new(r.cut_ab), &ocfg).map_err(e)?;
        let formula = r.commuting_formula.ok_or("pair not detected as commuting")?;
        Ok(vec![
            Check::absolute("c10.local_vs_spectral", stmt, r.log_m_local, spectral, 1e-4),
            Check::absolute("c10.formula_vs_local", fstmt, formula, r.log_m_local, 1e-4),
            Check::absolute("c10.formula_vs_spectral", fstmt, formula, spectral, 1e-4),
        ])
    };
    run().unwrap_or_else(|err| vec![Check::failed("c10", stmt, 1e-4, err)])
}

fn crit11(s: &Settings) -> Vec<Check> {
    let cfg = anomaly_cfg(s);
    let ocfg = oracle_cfg(s);
    let stmt = "log M_ζ(A,B): tr^B(L) + res(L log B/b - K) = spectral value";
    let sstmt = "B-weighted assembly = A-weighted assembly";
    let cases = [(0, 0.2), (0, 0.4), (1, 0.3)];
    let mut out = Vec::new();
    for (family, eps) in cases {
        let tag = format!("f{family}.eps{eps}");
        let run = || -> Result<Vec<Check>, String> {
            let (a, b) = noncommuting_pair(family, eps, s)?;
            let r = zeta_anomaly_local(&a, &b, None, &cfg).map_err(e)?;
            let spectral = anomaly_spectral(&oracle_op(&a)?, &oracle_op(&b)?, SpectralCut::new(r.cut_ab), &ocfg).map_err(e)?;
            Ok(vec![
                Check::absolute(format!("c11.{tag}.local_vs_spectral"), stmt, r.log_m_local, spectral, 1e-3),
                Check::absolute(format!("c11.{tag}.assemblies"), sstmt, r.swapped, r.log_m_local, 1e-6),
            ])
        };
        out.extend(run().unwrap_or_else(|err| vec![Check::failed(format!("c11.{tag}"), stmt, 1e-3, err)]));
    }
    out
}

// Problem files.

/// Checks of a suite applied to the operators of a problem file.
pub fn config_checks(suite: Suite, p: &ProblemConfig) -> Vec<Check> {
    let s = p.settings;
    let build = |spec: &crate::config::OperatorSpec| spec.build(&s).map_err(e);
    let a = match build(&p.a) {
        Ok(a) => a,
        Err(err) => return vec![Check::failed("config.a", "operator A builds", 0.0, err)],
    };
    let b = p.b.as_ref().map(build).transpose();
    let q = p.weight.as_ref().map(build).transpose();
    let (b, q) = match (b, q) {
        (Ok(b), Ok(q)) => (b, q),
        (Err(err), _) => return vec![Check::failed("config.b", "operator B builds", 0.0, err)],
        (_, Err(err)) => return vec![Check::failed("config.weight", "weight Q builds", 0.0, err)],
    };
    let groups: Vec<Suite> = match suite {
        Suite::All => vec![Suite::Residues, Suite::Traces, Suite::Determinants, Suite::Anomaly],
        other => vec![other],
    };
    let mut out = Vec::new();
    for g in groups {
        out.extend(match g {
            Suite::Residues => config_residues(&a, b.as_ref(), &s),
            Suite::Traces => config_traces(&a, q.as_ref(), &s),
            Suite::Determinants => config_determinants(&a, q.as_ref(), &s),
            Suite::Anomaly => config_anomaly(&a, b.as_ref(), q.as_ref(), &s),
            Suite::All => unreachable!(),
        });
    }
    out
}

fn config_residues(a: &BuiltOperator, b: Option<&BuiltOperator>, s: &Settings) -> Vec<Check> {
    let mut out = Vec::new();
    let stmt = "res(log A) + a ζ_A(0) = 0";
    if let (Some(m), true) = (a.multiplier(), a.op.order() > 0.0) {
        out.push(guard("residues.log_residue", stmt, s.tol, || {
            let r = residue(&a.op.log(s.depth).map_err(e)?);
            let z0 = zeta_at_zero(&m, &s.oracle()).map_err(e)?;
            Ok(Check::absolute("residues.log_residue", stmt, r, -a.op.order() * z0, s.tol))
        }));
    }
    if let Some(b) = b {
        let stmt = "res(log AB - log A - log B) = 0";
        out.push(guard("residues.l", stmt, s.tol, || {
            let l = l_symbol(&a.op, &b.op, None, &s.anomaly()).map_err(e)?;
            Ok(Check::vanishes("residues.l", stmt, residue(l.as_log()), s.tol))
        }));
    }
    out
}

fn config_traces(a: &BuiltOperator, q: Option<&BuiltOperator>, s: &Settings) -> Vec<Check> {
    let Some(q) = q else { return Vec::new() };
    let stmt = "tr^Q(A) from the defect formula = fp_{z=0} TR(A Q^(-z))";
    vec![guard("traces.weighted", stmt, s.tol, || {
        let opts = s.trace();
        let w = Weight::of(&q.op, s.depth).and_then(|w| w.acting_on(a.symbol().rank())).map_err(e)?;
        let v = weighted_trace_with_log(a.symbol().as_log(), &w.log_q, w.q, &opts).map_err(e)?.value;
        let qs = lift_weight(q, a.symbol().rank())?;
        let fit = weighted_trace_direct(a.symbol().as_log(), &qs, q.op.cut, &opts).map_err(e)?;
        Ok(Check::absolute("traces.weighted", stmt, v, fit.coeff(0), s.tol))
    })]
}

/// A scalar weight repeated on the diagonal of a bundle of rank `rank`.
fn lift_weight(q: &BuiltOperator, rank: usize) -> Result<PolyhomSymbol, String> {
    if q.symbol().rank() == rank {
        return Ok(q.symbol().clone());
    }
    let lifted: LogPolyhomSymbol = q.symbol().as_log().tensor_identity(rank).map_err(e)?;
    lifted.to_classical(0.0).map_err(e)
}

fn config_determinants(a: &BuiltOperator, q: Option<&BuiltOperator>, s: &Settings) -> Vec<Check> {
    let cfg = s.anomaly();
    let mut out = Vec::new();
    if a.op.order() <= 0.0 {
        return out;
    }
    if let Some(m) = a.multiplier() {
        let stmt = "log det_ζ(A) local = spectral";
        out.push(guard("determinants.zeta", stmt, s.tol, || {
            let local = log_det_zeta_local(&a.op, &cfg).map_err(e)?.log_det;
            let spectral = log_det_zeta_spectral(&m, &s.oracle()).map_err(e)?;
            Ok(Check::absolute("determinants.zeta", stmt, local, spectral, s.tol))
        }));
    }
    if let Some(q) = q {
        let stmt = "log det_ζ(A) - log det^Q(A) + res[(log A - (a/q) log Q)²]/(2a) = 0";
        out.push(guard("determinants.weighted", stmt, s.tol, || {
            let z = log_det_zeta_local(&a.op, &cfg).map_err(e)?.log_det;
            let w = log_det_weighted(&a.op, &q.op, &cfg).map_err(e)?.value;
            let la = a.op.log(cfg.depth).map_err(e)?;
            let wq = Weight::of(&q.op, cfg.depth).and_then(|w| w.acting_on(la.rank())).map_err(e)?;
            let diff = la.sub(&wq.log_q.scale(c(a.op.order() / wq.q))).map_err(e)?;
            let sq = star_product(&diff, &diff, cfg.depth).map_err(e)?;
            let total = z - w + residue(&sq) / (2.0 * a.op.order());
            Ok(Check::vanishes("determinants.weighted", stmt, total, s.tol))
        }));
    }
    out
}

fn config_anomaly(a: &BuiltOperator, b: Option<&BuiltOperator>, q: Option<&BuiltOperator>, s: &Settings) -> Vec<Check> {
    let Some(b) = b else { return Vec::new() };
    let cfg = s.anomaly();
    let mut out = Vec::new();
    let stmt = "log M_ζ(A,B) local = spectral";
    match zeta_anomaly_local(&a.op, &b.op, None, &cfg) {
        Ok(r) => {
            match (a.multiplier(), b.multiplier()) {
                (Some(ma), Some(mb)) => out.push(guard("anomaly.local_vs_spectral", stmt, s.tol, || {
                    let v = anomaly_spectral(&ma, &mb, SpectralCut::new(r.cut_ab), &s.oracle()).map_err(e)?;
                    Ok(Check::absolute("anomaly.local_vs_spectral", stmt, r.log_m_local, v, s.tol)
                        .with_note(format!("|local - spectral| = {:.3e}", (r.log_m_local - v).norm())))
                })),
                _ => out.push(Check::failed("anomaly.local_vs_spectral", stmt, s.tol, "spectral oracle needs multipliers")),
            }
            let sstmt = "B-weighted assembly = A-weighted assembly";
            out.push(Check::absolute("anomaly.assemblies", sstmt, r.swapped, r.log_m_local, 1e-6));
        }
        Err(err) => out.push(Check::failed("anomaly.local", stmt, s.tol, err)),
    }
    if let Some(q) = q {
        let stmt = "tr^Q(L(A,B)) by τ-quadrature = tr^Q(L(A,B)) by the defect formula";
        out.push(guard("anomaly.trql", stmt, 1e-5, || match det_q_anomaly(&a.op, &b.op, &q.op, None, &cfg) {
            Ok(r) => Ok(Check::absolute("anomaly.trql", stmt, r.path.value, r.defect, 1e-5)),
            Err(AnomalyError::Mismatch { lhs, rhs, .. }) => Ok(Check::absolute("anomaly.trql", stmt, rhs, lhs, 1e-5)),
            Err(err) => Err(e(err)),
        }));
    }
    out
}
