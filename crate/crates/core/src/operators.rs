//! Builders for the standard operators: powers of `c − Δ`, shifted Dirac operators, matrix
//! multipliers from asymptotic series and x-dependent symbols.

use num_complex::Complex64;
use std::f64::consts::PI;

use crate::grid::PeriodicMatrixFunction;
use crate::linalg::{pow_branch, CMat};
use crate::series::{integer_gap, AsymSeries, SeriesError};
use crate::symbol::{ExactEvaluator, HomogComponent, PolyhomSymbol, SymbolError};

pub const DEFAULT_GRID: usize = 64;
pub const DEFAULT_DEPTH: usize = 8;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum BuildError {
    #[error(transparent)]
    Series(#[from] SeriesError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error("series of length {have} cannot fill depth {depth}")]
    TooShort { have: usize, depth: usize },
    #[error("matrix entries must be square and nonempty")]
    Shape,
}

/// Matrix multiplier from per-entry asymptotic series on each side (`t = |ξ|`).
/// Entries of lower degree are padded with zeros; the order is the largest entry degree.
pub fn matrix_multiplier(
    plus: &[Vec<AsymSeries>],
    minus: &[Vec<AsymSeries>],
    depth: usize,
    grid_size: usize,
    exact: Option<ExactEvaluator>,
) -> Result<PolyhomSymbol, BuildError> {
    let m = plus.len();
    if m == 0 || plus.iter().chain(minus).any(|r| r.len() != m) || minus.len() != m {
        return Err(BuildError::Shape);
    }
    let all: Vec<&AsymSeries> = plus.iter().chain(minus).flatten().collect();
    let mut order = all[0].lead;
    for s in &all {
        if integer_gap(s.lead, order)? > 0 {
            order = s.lead;
        }
    }
    let side = |entries: &[Vec<AsymSeries>], j: usize| -> Result<CMat, BuildError> {
        let mut mat = CMat::zeros(m, m);
        for (r, row) in entries.iter().enumerate() {
            for (c, s) in row.iter().enumerate() {
                let gap = integer_gap(order, s.lead)?;
                let idx = j as i64 - gap;
                if idx >= 0 {
                    let idx = idx as usize;
                    if idx >= s.len() && s.coeffs.iter().any(|v| v.norm() > 0.0) {
                        return Err(BuildError::TooShort { have: s.len() + gap as usize, depth });
                    }
                    mat[(r, c)] = s.coeffs.get(idx).copied().unwrap_or_default();
                }
            }
        }
        Ok(mat)
    };
    let mut comps = Vec::with_capacity(depth);
    for j in 0..depth {
        comps.push(HomogComponent::new(
            order - j as f64,
            PeriodicMatrixFunction::constant(grid_size, side(plus, j)?),
            PeriodicMatrixFunction::constant(grid_size, side(minus, j)?),
        ));
    }
    Ok(PolyhomSymbol::new(order, comps, exact)?)
}

/// Scalar multiplier with the given series on each side.
pub fn scalar_multiplier(
    plus: &AsymSeries,
    minus: &AsymSeries,
    depth: usize,
    grid_size: usize,
    exact: Option<ExactEvaluator>,
) -> Result<PolyhomSymbol, BuildError> {
    matrix_multiplier(&[vec![plus.clone()]], &[vec![minus.clone()]], depth, grid_size, exact)
}

fn s1(v: Complex64) -> CMat {
    CMat::from_element(1, 1, v)
}

/// `(c − Δ)^p`, symbol `(c + ξ²)^p`, `c > 0`.
pub fn shifted_laplacian_power(c: f64, p: Complex64, depth: usize, grid_size: usize) -> Result<PolyhomSymbol, BuildError> {
    let len = depth + 2;
    let t = AsymSeries::variable(Complex64::new(1.0, 0.0), len);
    let base = t.mul(&t).add(&AsymSeries::constant(Complex64::new(c, 0.0), len))?;
    let s = base.pow(p, PI)?;
    let exact = ExactEvaluator::multiplier(move |xi| s1(pow_branch(Complex64::new(c + xi * xi, 0.0), p, PI)));
    scalar_multiplier(&s, &s, depth, grid_size, Some(exact))
}

/// `(1 − Δ)^p`.
pub fn laplacian_power(p: f64, depth: usize, grid_size: usize) -> Result<PolyhomSymbol, BuildError> {
    shifted_laplacian_power(1.0, Complex64::new(p, 0.0), depth, grid_size)
}

/// `D + c` with `D = −i d/dx`, symbol `ξ + c`.
pub fn dirac_shift(c: Complex64, depth: usize, grid_size: usize) -> Result<PolyhomSymbol, BuildError> {
    let len = depth + 1;
    let one = Complex64::new(1.0, 0.0);
    let plus = AsymSeries::variable(one, len).add(&AsymSeries::constant(c, len))?;
    let minus = AsymSeries::variable(-one, len).add(&AsymSeries::constant(c, len))?;
    let exact = ExactEvaluator::multiplier(move |xi| s1(Complex64::new(xi, 0.0) + c));
    scalar_multiplier(&plus, &minus, depth, grid_size, Some(exact))
}

/// `(1 − Δ)^{a/2} (M + ε (1 − Δ)^{-1/2} P)` for constant matrices `M`, `P`: a 2×2-type
/// multiplier whose lower-order part need not commute with the leading part.
pub fn perturbed_matrix_multiplier(
    a: f64,
    lead: &CMat,
    pert: &CMat,
    eps: f64,
    depth: usize,
    grid_size: usize,
) -> Result<PolyhomSymbol, BuildError> {
    let m = lead.nrows();
    let len = depth + 2;
    let t = AsymSeries::variable(Complex64::new(1.0, 0.0), len);
    let base = t.mul(&t).add(&AsymSeries::constant(Complex64::new(1.0, 0.0), len))?;
    let outer = base.pow(Complex64::new(a / 2.0, 0.0), PI)?;
    let inner = base.pow(Complex64::new(a / 2.0 - 0.5, 0.0), PI)?;
    let mut entries: Vec<Vec<AsymSeries>> = Vec::with_capacity(m);
    for r in 0..m {
        let mut row = Vec::with_capacity(m);
        for c in 0..m {
            let e = outer.scale(lead[(r, c)]).add(&inner.scale(pert[(r, c)] * eps))?;
            row.push(e);
        }
        entries.push(row);
    }
    let (lead_c, pert_c) = (lead.clone(), pert.clone());
    let exact = ExactEvaluator::multiplier(move |xi| {
        let q = 1.0 + xi * xi;
        &lead_c * Complex64::new(q.powf(a / 2.0), 0.0) + &pert_c * Complex64::new(eps * q.powf(a / 2.0 - 0.5), 0.0)
    });
    matrix_multiplier(&entries, &entries, depth, grid_size, Some(exact))
}

/// Homogeneous x-dependent symbol `Σ_j σ_{a−j}` from component functions of `x` on each side.
pub fn x_dependent_symbol(
    order: Complex64,
    comps: &[(Box<dyn Fn(f64) -> CMat>, Box<dyn Fn(f64) -> CMat>)],
    grid_size: usize,
) -> Result<PolyhomSymbol, BuildError> {
    let cs = comps
        .iter()
        .enumerate()
        .map(|(j, (p, m))| {
            HomogComponent::new(
                order - j as f64,
                PeriodicMatrixFunction::from_fn(grid_size, p),
                PeriodicMatrixFunction::from_fn(grid_size, m),
            )
        })
        .collect();
    Ok(PolyhomSymbol::new(order, cs, None)?)
}

/// `f(x) |ξ|^a` padded with zero components to `depth`, exact on integer modes.
pub fn x_weighted_power(f: impl Fn(f64) -> f64 + Send + Sync + Clone + 'static, a: f64, depth: usize, grid_size: usize) -> Result<PolyhomSymbol, BuildError> {
    let mut comps: Vec<(Box<dyn Fn(f64) -> CMat>, Box<dyn Fn(f64) -> CMat>)> = Vec::new();
    let (f1, f2) = (f.clone(), f.clone());
    comps.push((Box::new(move |x| s1(Complex64::new(f1(x), 0.0))), Box::new(move |x| s1(Complex64::new(f2(x), 0.0)))));
    for _ in 1..depth {
        comps.push((Box::new(|_| s1(Complex64::new(0.0, 0.0))), Box::new(|_| s1(Complex64::new(0.0, 0.0)))));
    }
    let sym = x_dependent_symbol(Complex64::new(a, 0.0), &comps, grid_size)?;
    let samples: Vec<f64> = (0..grid_size).map(|k| f(crate::grid::grid_point(k, grid_size))).collect();
    let exact = ExactEvaluator::grid(move |xi| {
        // The zero mode is annihilated unless a = 0.
        let w = if xi == 0.0 { if a == 0.0 { 1.0 } else { 0.0 } } else { xi.abs().powf(a) };
        samples.iter().map(|v| s1(Complex64::new(v * w, 0.0))).collect()
    });
    Ok(sym.with_exact(Some(exact)))
}
