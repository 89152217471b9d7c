//! Composition of symbols, parametrix inversion and evaluation with the cut-off.

use num_complex::Complex64;
use rustfft::FftPlanner;

use crate::grid::PeriodicMatrixFunction;
use crate::linalg::{inverse, smallest_singular_value, CMat};
use crate::symbol::{ExactEvaluator, HomogComponent, LogPolyhomSymbol, PolyhomSymbol, SymbolError};

/// Singular values below this make a leading component non-invertible.
pub const SINGULAR_TOL: f64 = 1e-10;

type LogPoly = Vec<PeriodicMatrixFunction>;

/// `∂_ξ` of `Σ_l p[l] |ξ|^d log^l|ξ|` on the side `sign`, as coefficients of degree `d − 1`.
fn xi_derivative(p: &LogPoly, d: Complex64, sign: f64) -> LogPoly {
    let k = p.len();
    (0..k)
        .map(|l| {
            let mut v = p[l].scale(d * sign);
            if l + 1 < k {
                v = v.add(&p[l + 1].scale(Complex64::new(sign * (l + 1) as f64, 0.0)));
            }
            v
        })
        .collect()
}

fn conv(p: &LogPoly, q: &LogPoly) -> LogPoly {
    let g = p[0].grid_size();
    let m = p[0].rank();
    let mut out = vec![PeriodicMatrixFunction::zero(g, m); p.len() + q.len() - 1];
    for (i, a) in p.iter().enumerate() {
        for (j, b) in q.iter().enumerate() {
            out[i + j] = out[i + j].add(&a.mul(b));
        }
    }
    out
}

fn side_poly(row: &[HomogComponent], positive: bool) -> LogPoly {
    row.iter().map(|c| c.side(positive).clone()).collect()
}

fn check_pair(s: &LogPolyhomSymbol, t: &LogPolyhomSymbol) -> Result<(), SymbolError> {
    if s.rank() != t.rank() {
        return Err(SymbolError::RankMismatch(s.rank(), t.rank()));
    }
    if s.grid_size() != t.grid_size() {
        return Err(SymbolError::GridMismatch(s.grid_size(), t.grid_size()));
    }
    Ok(())
}

fn factorials(n: usize) -> Vec<f64> {
    let mut f = vec![1.0; n + 1];
    for k in 1..=n {
        f[k] = f[k - 1] * k as f64;
    }
    f
}

/// `(−i)^α / α!`.
fn star_weight(alpha: usize, fact: &[f64]) -> Complex64 {
    Complex64::new(0.0, -1.0).powu(alpha as u32) / fact[alpha]
}

/// Composition of exact evaluators where it is available in closed form on integer modes.
fn compose_exact(a: Option<&ExactEvaluator>, b: Option<&ExactEvaluator>, grid_size: usize) -> Option<ExactEvaluator> {
    match (a?, b?) {
        (ExactEvaluator::Multiplier(f), ExactEvaluator::Multiplier(g)) => {
            let (f, g) = (f.clone(), g.clone());
            Some(ExactEvaluator::multiplier(move |xi| f(xi) * g(xi)))
        }
        (ExactEvaluator::Grid(f), ExactEvaluator::Multiplier(g)) => {
            let (f, g) = (f.clone(), g.clone());
            Some(ExactEvaluator::grid(move |xi| {
                let right = g(xi);
                f(xi).into_iter().map(|m| m * &right).collect()
            }))
        }
        (ExactEvaluator::Multiplier(f), ExactEvaluator::Grid(g)) => {
            let (f, g) = (f.clone(), g.clone());
            Some(ExactEvaluator::grid(move |xi| multiplier_after_grid(&*f, &g(xi), xi, grid_size)))
        }
        (ExactEvaluator::Grid(f), ExactEvaluator::Grid(g)) => {
            let (f, g) = (f.clone(), g.clone());
            Some(ExactEvaluator::grid(move |xi| grid_after_grid(&*f, &g(xi), xi, grid_size)))
        }
    }
}

/// Fourier coefficients `b̂_k`, `k` in FFT order, of each entry of the samples `b`.
fn fourier_coefficients(b: &[CMat], g: usize) -> Vec<CMat> {
    let m = b[0].nrows();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(g);
    let mut coeffs: Vec<CMat> = vec![CMat::zeros(m, m); g];
    let mut buf = vec![Complex64::new(0.0, 0.0); g];
    for i in 0..m {
        for j in 0..m {
            for k in 0..g {
                buf[k] = b[k][(i, j)];
            }
            fwd.process(&mut buf);
            for k in 0..g {
                coeffs[k][(i, j)] = buf[k] / g as f64;
            }
        }
    }
    coeffs
}

fn fft_frequency(k: usize, g: usize) -> f64 {
    if k <= g / 2 {
        k as f64
    } else {
        k as f64 - g as f64
    }
}

/// `Op(a) ∘ Op(b)` on `e^{iξx}` for two x-dependent evaluators:
/// `Σ_k a(x, ξ+k) b̂_k(ξ) e^{ikx}` sampled on the grid.
fn grid_after_grid(f: &dyn Fn(f64) -> Vec<CMat>, b: &[CMat], xi: f64, g: usize) -> Vec<CMat> {
    let m = b[0].nrows();
    let coeffs = fourier_coefficients(b, g);
    let scale = coeffs.iter().map(crate::linalg::max_abs).fold(0.0, f64::max);
    let mut out: Vec<CMat> = vec![CMat::zeros(m, m); g];
    for (k, c) in coeffs.iter().enumerate() {
        if crate::linalg::max_abs(c) <= 1e-16 * scale {
            continue;
        }
        let freq = fft_frequency(k, g);
        let a = f(xi + freq);
        for (j, o) in out.iter_mut().enumerate() {
            let phase = Complex64::from_polar(1.0, freq * crate::grid::grid_point(j, g));
            *o += &a[j.min(a.len() - 1)] * c * phase;
        }
    }
    out
}

/// `Op(σ_A) ∘ Op(b)` on `e^{iξx}` with `A` a multiplier: `Σ_k σ_A(ξ+k) b̂_k(ξ) e^{ikx}`.
fn multiplier_after_grid(f: &dyn Fn(f64) -> CMat, b: &[CMat], xi: f64, g: usize) -> Vec<CMat> {
    let m = b[0].nrows();
    let mut planner = FftPlanner::<f64>::new();
    let fwd = planner.plan_fft_forward(g);
    let inv = planner.plan_fft_inverse(g);
    // Fourier coefficients of each entry of b.
    let mut coeffs: Vec<CMat> = vec![CMat::zeros(m, m); g];
    let mut buf = vec![Complex64::new(0.0, 0.0); g];
    for i in 0..m {
        for j in 0..m {
            for k in 0..g {
                buf[k] = b[k][(i, j)];
            }
            fwd.process(&mut buf);
            for k in 0..g {
                coeffs[k][(i, j)] = buf[k] / g as f64;
            }
        }
    }
    for (k, c) in coeffs.iter_mut().enumerate() {
        let freq = if k <= g / 2 { k as f64 } else { k as f64 - g as f64 };
        if c.iter().any(|v| v.norm() > 0.0) {
            *c = f(xi + freq) * &*c;
        }
    }
    let mut out: Vec<CMat> = vec![CMat::zeros(m, m); g];
    for i in 0..m {
        for j in 0..m {
            for k in 0..g {
                buf[k] = coeffs[k][(i, j)];
            }
            inv.process(&mut buf);
            for k in 0..g {
                out[k][(i, j)] = buf[k];
            }
        }
    }
    out
}

/// `σ ⋆ τ` truncated to `depth` components of degrees `(a₁+a₂) − j`.
pub fn star_product(
    sigma: &LogPolyhomSymbol,
    tau: &LogPolyhomSymbol,
    depth: usize,
) -> Result<LogPolyhomSymbol, SymbolError> {
    check_pair(sigma, tau)?;
    let max_valid = sigma.depth().min(tau.depth());
    if depth == 0 || depth > max_valid {
        return Err(SymbolError::DepthTooLarge { requested: depth, max_valid });
    }
    let order = sigma.order() + tau.order();
    let log_type = sigma.log_type() + tau.log_type();
    let g = sigma.grid_size();
    let m = sigma.rank();
    let fact = factorials(depth);
    // ∂_x^α τ_{j2}, both sides, for α ≤ depth−1−j2.
    let mut dx: Vec<Vec<[LogPoly; 2]>> = Vec::with_capacity(depth);
    for j2 in 0..depth {
        let row = &tau.components()[j2];
        let mut per_alpha = Vec::new();
        for alpha in 0..depth - j2 {
            let plus: LogPoly = row.iter().map(|c| c.plus.derivative(alpha)).collect();
            let minus: LogPoly = row.iter().map(|c| c.minus.derivative(alpha)).collect();
            per_alpha.push([plus, minus]);
        }
        dx.push(per_alpha);
    }
    let mut out: Vec<Vec<HomogComponent>> = (0..depth)
        .map(|j| (0..=log_type).map(|_| HomogComponent::zero(order - j as f64, g, m)).collect())
        .collect();
    for j1 in 0..depth {
        let row = &sigma.components()[j1];
        let d0 = sigma.order() - j1 as f64;
        for (si, positive) in [(0usize, true), (1usize, false)] {
            let sign = if positive { 1.0 } else { -1.0 };
            let mut dxi = side_poly(row, positive);
            let mut d = d0;
            for alpha in 0..depth - j1 {
                if alpha > 0 {
                    dxi = xi_derivative(&dxi, d, sign);
                    d -= 1.0;
                }
                let w = star_weight(alpha, &fact);
                for j2 in 0..depth - j1 - alpha {
                    let j = j1 + j2 + alpha;
                    let prod = conv(&dxi, &dx[j2][alpha][si]);
                    for (l, p) in prod.iter().enumerate() {
                        let target = &mut out[j][l];
                        let side = if positive { &mut target.plus } else { &mut target.minus };
                        *side = side.add(&p.scale(w));
                    }
                }
            }
        }
    }
    let exact = compose_exact(sigma.exact(), tau.exact(), g);
    Ok(LogPolyhomSymbol::new(order, out, exact)?.with_cutoff(sigma.cutoff()))
}

/// Classical product; the result is classical.
pub fn star_classical(sigma: &PolyhomSymbol, tau: &PolyhomSymbol, depth: usize) -> Result<PolyhomSymbol, SymbolError> {
    let p = star_product(sigma.as_log(), tau.as_log(), depth)?;
    p.to_classical(f64::INFINITY)
}

/// `σ ⋆ τ − τ ⋆ σ`.
pub fn commutator_symbol(
    sigma: &LogPolyhomSymbol,
    tau: &LogPolyhomSymbol,
    depth: usize,
) -> Result<LogPolyhomSymbol, SymbolError> {
    let a = star_product(sigma, tau, depth)?;
    let b = star_product(tau, sigma, depth)?;
    a.sub(&b)
}

/// Leading inverse on both sides, reporting the first singular point.
pub fn invert_leading(c: &HomogComponent) -> Result<(PeriodicMatrixFunction, PeriodicMatrixFunction), SymbolError> {
    let mut res = Vec::with_capacity(2);
    for positive in [true, false] {
        let f = c.side(positive);
        let check = if f.is_constant_repr() { 1 } else { f.grid_size() };
        for k in 0..check {
            let sv = smallest_singular_value(f.sample(k));
            let scale = crate::linalg::frob(f.sample(k)).max(1e-300);
            if sv <= SINGULAR_TOL * scale.max(1.0) {
                return Err(SymbolError::SingularLeading { gridpoint: k, positive, sv });
            }
        }
        let inv = f.inverse().map_err(|k| SymbolError::SingularLeading { gridpoint: k, positive, sv: 0.0 })?;
        res.push(inv);
    }
    let minus = res.pop().unwrap();
    let plus = res.pop().unwrap();
    Ok((plus, minus))
}

/// `∂_ξ^α σ_k` at `ξ = ±1` for `k + α < depth`, indexed `[k][α][side]`.
pub(crate) fn xi_derivatives(sigma: &PolyhomSymbol, depth: usize) -> Vec<Vec<[PeriodicMatrixFunction; 2]>> {
    let a = sigma.order();
    let mut dxi = Vec::with_capacity(depth);
    for k in 0..depth {
        let c = sigma.comp(k);
        let mut d = a - k as f64;
        let mut cur = [c.plus.clone(), c.minus.clone()];
        let mut row = vec![cur.clone()];
        for _ in 1..depth - k {
            cur = [cur[0].scale(d), cur[1].scale(-d)];
            d -= 1.0;
            row.push(cur.clone());
        }
        dxi.push(row);
    }
    dxi
}

/// Components `τ_j` at `ξ = ±1` solving `Σ_{k+l+α=j} (−i)^α/α! ∂_ξ^α σ_k ∂_x^α τ_l = δ_{j0}`,
/// given `τ_0 = lead_inv` and the derivatives of `σ` (the `k = α = 0` entry is never read).
pub(crate) fn right_parametrix(
    lead_inv: [PeriodicMatrixFunction; 2],
    dxi: &[Vec<[PeriodicMatrixFunction; 2]>],
    depth: usize,
) -> Vec<[PeriodicMatrixFunction; 2]> {
    let fact = factorials(depth);
    let g = lead_inv[0].grid_size();
    let m = lead_inv[0].rank();
    let mut tau: Vec<[PeriodicMatrixFunction; 2]> = vec![lead_inv.clone()];
    // ∂_x^α τ_l, filled lazily.
    let mut dtau: Vec<Vec<[PeriodicMatrixFunction; 2]>> = Vec::with_capacity(depth);
    for j in 1..depth {
        let l_new = tau.len() - 1;
        let row: Vec<[PeriodicMatrixFunction; 2]> = (0..depth - l_new)
            .map(|alpha| [tau[l_new][0].derivative(alpha), tau[l_new][1].derivative(alpha)])
            .collect();
        dtau.push(row);
        let mut acc = [PeriodicMatrixFunction::zero(g, m), PeriodicMatrixFunction::zero(g, m)];
        for l in 0..j {
            for alpha in 0..=(j - l) {
                let k = j - l - alpha;
                let w = star_weight(alpha, &fact);
                for s in 0..2 {
                    let term = dxi[k][alpha][s].mul(&dtau[l][alpha][s]);
                    acc[s] = acc[s].add(&term.scale(w));
                }
            }
        }
        let minus_one = Complex64::new(-1.0, 0.0);
        tau.push([lead_inv[0].mul(&acc[0]).scale(minus_one), lead_inv[1].mul(&acc[1]).scale(minus_one)]);
    }
    tau
}

/// Parametrix symbol `τ` of order `−a` with `σ ⋆ τ ~ I` through `depth` components.
pub fn inverse_symbol(sigma: &PolyhomSymbol, depth: usize) -> Result<PolyhomSymbol, SymbolError> {
    if depth == 0 || depth > sigma.depth() {
        return Err(SymbolError::DepthTooLarge { requested: depth, max_valid: sigma.depth() });
    }
    let a = sigma.order();
    let (inv_p, inv_m) = invert_leading(sigma.comp(0))?;
    let dxi = xi_derivatives(sigma, depth);
    let tau = right_parametrix([inv_p, inv_m], &dxi, depth);
    let comps = tau
        .into_iter()
        .enumerate()
        .map(|(j, [p, m])| HomogComponent::new(-a - j as f64, p, m))
        .collect();
    let exact = match sigma.exact() {
        Some(ExactEvaluator::Multiplier(f)) => {
            let f = f.clone();
            let rank = sigma.rank();
            Some(ExactEvaluator::multiplier(move |xi| inverse(&f(xi)).unwrap_or_else(|| CMat::zeros(rank, rank))))
        }
        _ => None,
    };
    Ok(PolyhomSymbol::new(-a, comps, exact)?.with_cutoff(sigma.cutoff()))
}

/// Full symbol at `(x, ξ)`: the exact evaluator for `|ξ| ≥ 1` when present, otherwise the
/// cut-off expansion.
pub fn homog_eval(sigma: &LogPolyhomSymbol, x: f64, xi: f64) -> CMat {
    if xi.abs() >= 1.0 {
        if let Some(e) = sigma.exact() {
            return match e {
                ExactEvaluator::Multiplier(f) => f(xi),
                ExactEvaluator::Grid(_) => e.values(xi, sigma.grid_size()).eval_at(x),
            };
        }
    }
    let chi = sigma.cutoff().eval(xi);
    if chi == 0.0 {
        return CMat::zeros(sigma.rank(), sigma.rank());
    }
    sigma.expansion_at(x, xi) * Complex64::new(chi, 0.0)
}
