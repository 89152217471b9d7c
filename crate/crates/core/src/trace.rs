//! Residue densities, cut-off traces, canonical and weighted traces.
//!
//! The cut-off density `TR_x` has two realizations.
//!
//! * [`TraceMode::Toroidal`] (default): the operator acts on the modes `e^{inx}`, so the
//!   cut-off integral is the finite part of the mode sum `(1/2π) Σ_{|n|≤R} tr σ(x, n)`. Power
//!   terms `|n|^d log^l|n|` are summed in closed form through derivatives of `ζ`, the remainder
//!   `σ − χ·Σσ_{a−j,l}` is summed mode by mode up to `Λ`, and the tail beyond `Λ` is modelled by
//!   the first neglected degree. On trace-class operators this is the operator trace.
//! * [`TraceMode::Continuous`]: the finite part of `(1/2π) ∫_{−R}^{R} tr σ(x, ξ) dξ`.
//!
//! Both are exactly independent of the cut-off `χ` when the degree `−1` trace vanishes.

use nalgebra::{DMatrix, DVector};
use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::grid::grid_point;
use crate::holo::{complex_power_symbol, log_symbol, HoloError, SpectralCut};
use crate::quad::gauss_legendre;
use crate::special::{fp_power_log_sum, hurwitz_zeta};
use crate::star::{commutator_symbol, star_product};
use crate::symbol::{abs_pow, HomogComponent, LogPolyhomSymbol, PolyhomSymbol, SymbolError, DEGREE_TOL};

pub const DEFAULT_LAMBDA: usize = 1000;
/// Densities below this are treated as vanishing.
pub const RESIDUE_TOL: f64 = 1e-10;
/// Allowed drift of a weighted trace between `Λ` and `Λ/2`.
pub const LAMBDA_DRIFT_TOL: f64 = 1e-6;
/// Allowed residual of the Laurent fit relative to `max(1, |c₀|)`.
pub const FIT_TOL: f64 = 1e-6;
pub const COBOUNDARY_TOL: f64 = 1e-7;
pub const COMMUTATOR_TRACE_TOL: f64 = 1e-6;

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum TraceMode {
    #[default]
    Toroidal,
    Continuous,
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TraceOptions {
    pub mode: TraceMode,
    pub lambda: usize,
    /// Return the density even when the degree `−1` trace does not vanish.
    pub accept_obstruction: bool,
}

impl Default for TraceOptions {
    fn default() -> Self {
        TraceOptions { mode: TraceMode::Toroidal, lambda: DEFAULT_LAMBDA, accept_obstruction: false }
    }
}

impl TraceOptions {
    pub fn with_lambda(mut self, lambda: usize) -> Self {
        self.lambda = lambda;
        self
    }

    pub fn with_mode(mut self, mode: TraceMode) -> Self {
        self.mode = mode;
        self
    }

    pub fn accepting_obstruction(mut self) -> Self {
        self.accept_obstruction = true;
        self
    }
}

/// Integrals over `S¹` of the parts of a density.
#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct Breakdown {
    /// Closed-form finite parts of the homogeneous terms.
    pub analytic: Complex64,
    /// Remainder summed or integrated numerically up to `Λ`.
    pub numeric: Complex64,
    /// Modelled remainder beyond `Λ`.
    pub tail: Complex64,
    /// `max_x Σ_l |tr σ_{−1,l}(x,+1) + tr σ_{−1,l}(x,−1)| / 2π`.
    pub residue_obstruction: f64,
}

/// A density sampled on the uniform grid together with its integral over `S¹`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DensityReport {
    pub x_grid: Vec<f64>,
    pub values_re: Vec<f64>,
    pub values_im: Vec<f64>,
    /// `2π × mean(values)`.
    pub integral: Complex64,
    pub error_estimate: f64,
    pub breakdown: Breakdown,
}

impl DensityReport {
    pub fn new(values: &[Complex64], error_estimate: f64, breakdown: Breakdown) -> Self {
        let g = values.len();
        let integral = values.iter().sum::<Complex64>() * (2.0 * PI / g as f64);
        DensityReport {
            x_grid: (0..g).map(|k| grid_point(k, g)).collect(),
            values_re: values.iter().map(|v| v.re).collect(),
            values_im: values.iter().map(|v| v.im).collect(),
            integral,
            error_estimate,
            breakdown,
        }
    }

    pub fn values(&self) -> Vec<Complex64> {
        self.values_re.iter().zip(&self.values_im).map(|(r, i)| Complex64::new(*r, *i)).collect()
    }

    pub fn grid_size(&self) -> usize {
        self.x_grid.len()
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum TraceError {
    #[error("degree −1 trace does not vanish (density up to {0:e}); the cut-off trace depends on the scaling of the cut-off")]
    ResidueObstruction(f64),
    #[error("remainder of degree {degree} is not summable; increase the depth beyond {depth}")]
    RemainderNotSummable { degree: Complex64, depth: usize },
    #[error("weight must have positive real order, got {0}")]
    NonPositiveWeight(Complex64),
    #[error("weighted trace drifts by {0:e} between Λ and Λ/2")]
    LambdaDrift(f64),
    #[error("Laurent fit residual {residual:e} exceeds tolerance")]
    FitResidual { residual: f64, samples: Vec<(Complex64, Complex64)> },
    #[error("coboundary sides disagree: {lhs} vs {rhs}")]
    CoboundaryMismatch { lhs: Complex64, rhs: Complex64 },
    #[error(transparent)]
    Symbol(#[from] SymbolError),
    #[error(transparent)]
    Holo(#[from] HoloError),
}

fn czero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

/// Index `j` with `order − j = d`, if within the retained depth.
pub fn degree_index(sigma: &LogPolyhomSymbol, d: Complex64) -> Option<usize> {
    let gap = sigma.order() - d;
    let j = gap.re.round();
    if (gap - Complex64::new(j, 0.0)).norm() > DEGREE_TOL || j < 0.0 || j as usize >= sigma.depth() {
        return None;
    }
    Some(j as usize)
}

/// `(1/2π)[tr c(x,+1) + tr c(x,−1)]` on the grid.
fn cosphere_density(c: &HomogComponent) -> Vec<Complex64> {
    let p = c.plus.trace_samples();
    let m = c.minus.trace_samples();
    p.iter().zip(&m).map(|(a, b)| (a + b) / (2.0 * PI)).collect()
}

/// Cosphere density of the degree `−1` component with log power `l`, zero when absent.
pub fn degree_minus_one_density(sigma: &LogPolyhomSymbol, l: usize) -> Vec<Complex64> {
    let g = sigma.grid_size();
    match degree_index(sigma, Complex64::new(-1.0, 0.0)).and_then(|j| sigma.component(j, l)) {
        Some(c) => cosphere_density(c),
        None => vec![czero(); g],
    }
}

fn obstruction(sigma: &LogPolyhomSymbol) -> f64 {
    (0..=sigma.log_type())
        .map(|l| degree_minus_one_density(sigma, l))
        .fold(vec![0.0; sigma.grid_size()], |acc, d| acc.iter().zip(&d).map(|(a, v)| a + v.norm()).collect())
        .into_iter()
        .fold(0.0, f64::max)
}

/// Residue density `res_x`; only the log-free degree `−1` part contributes.
pub fn residue_density(sigma: &LogPolyhomSymbol) -> DensityReport {
    let v = degree_minus_one_density(sigma, 0);
    let mut r = DensityReport::new(&v, 0.0, Breakdown::default());
    r.breakdown.analytic = r.integral;
    r
}

pub fn residue(sigma: &LogPolyhomSymbol) -> Complex64 {
    residue_density(sigma).integral
}

/// Traces of every component on every gridpoint: `[j][l][side][k]`, side 0 is `ξ > 0`.
/// Multipliers keep a single gridpoint.
struct ComponentTraces {
    width: usize,
    degrees: Vec<Complex64>,
    tr: Vec<Vec<[Vec<Complex64>; 2]>>,
}

impl ComponentTraces {
    fn new(sigma: &LogPolyhomSymbol) -> Self {
        let width = if sigma.is_multiplier() { 1 } else { sigma.grid_size() };
        let tr = sigma
            .components()
            .iter()
            .map(|row| {
                row.iter()
                    .map(|c| {
                        let mut p = c.plus.trace_samples();
                        let mut m = c.minus.trace_samples();
                        p.truncate(width);
                        m.truncate(width);
                        [p, m]
                    })
                    .collect()
            })
            .collect();
        let degrees = (0..sigma.depth()).map(|j| sigma.order() - j as f64).collect();
        ComponentTraces { width, degrees, tr }
    }

    /// `tr Σ σ_{a−j,l}(x_k, ξ) log^l|ξ|` for all `k`.
    fn expansion(&self, xi: f64) -> Vec<Complex64> {
        let side = if xi > 0.0 { 0 } else { 1 };
        let lg = xi.abs().ln();
        let mut out = vec![czero(); self.width];
        for (j, row) in self.tr.iter().enumerate() {
            let p = abs_pow(xi, self.degrees[j]);
            for (l, sides) in row.iter().enumerate() {
                let w = p * lg.powi(l as i32);
                for (o, t) in out.iter_mut().zip(&sides[side]) {
                    *o += t * w;
                }
            }
        }
        out
    }

    /// `Σ_{j,l} coef(d_j, l) · (tr σ_{j,l}(x_k,+1) + tr σ_{j,l}(x_k,−1))`.
    fn weighted_sum(&self, coef: impl Fn(Complex64, usize) -> Complex64) -> Vec<Complex64> {
        let mut out = vec![czero(); self.width];
        for (j, row) in self.tr.iter().enumerate() {
            for (l, sides) in row.iter().enumerate() {
                if sides[0].iter().chain(&sides[1]).all(|v| *v == czero()) {
                    continue;
                }
                let w = coef(self.degrees[j], l);
                for k in 0..self.width {
                    out[k] += (sides[0][k] + sides[1][k]) * w;
                }
            }
        }
        out
    }
}

/// `tr σ(x_k, ξ) − χ(ξ) tr Σ σ_{a−j,l}(x_k, ξ) log^l|ξ|`.
fn remainder(sigma: &LogPolyhomSymbol, ct: &ComponentTraces, xi: f64) -> Vec<Complex64> {
    let e = sigma.exact().expect("remainder needs an exact evaluator").raw(xi);
    let chi = sigma.cutoff().eval(xi);
    let p = if chi == 0.0 { vec![czero(); ct.width] } else { ct.expansion(xi) };
    (0..ct.width).map(|k| e[k.min(e.len() - 1)].trace() - p[k] * chi).collect()
}

struct Parts {
    analytic: Vec<Complex64>,
    numeric: Vec<Complex64>,
    tail: Vec<Complex64>,
    /// Same total with `Λ/2` in place of `Λ`.
    half: Vec<Complex64>,
}

fn check_summable(sigma: &LogPolyhomSymbol) -> Result<Complex64, TraceError> {
    let d_n = sigma.order() - sigma.depth() as f64;
    if sigma.exact().is_some() && d_n.re >= -1.0 - 1e-9 {
        return Err(TraceError::RemainderNotSummable { degree: d_n, depth: sigma.depth() });
    }
    Ok(d_n)
}

fn toroidal_parts(sigma: &LogPolyhomSymbol, ct: &ComponentTraces, lambda: usize) -> Result<Parts, TraceError> {
    let w = ct.width;
    let chi = sigma.cutoff();
    // F(d, l) − Σ_{1≤n<outer} (1 − χ(n)) n^d log^l n.
    let analytic = ct.weighted_sum(|d, l| {
        let mut v = fp_power_log_sum(d, l);
        let mut n = 1usize;
        while (n as f64) < chi.outer {
            let nf = n as f64;
            v -= abs_pow(nf, d) * nf.ln().powi(l as i32) * (1.0 - chi.eval(nf));
            n += 1;
        }
        v
    });
    if sigma.exact().is_none() {
        let z = vec![czero(); w];
        return Ok(Parts { analytic, numeric: z.clone(), tail: z.clone(), half: z });
    }
    let d_n = check_summable(sigma)?;
    let lam = lambda.max(2) as i64;
    let rs: Vec<Vec<Complex64>> = (-lam..=lam).into_par_iter().map(|n| remainder(sigma, ct, n as f64)).collect();
    let at = |n: i64| &rs[(n + lam) as usize];
    let partial = |cut: i64| -> Vec<Complex64> {
        let mut s = vec![czero(); w];
        for n in -cut..=cut {
            for (a, v) in s.iter_mut().zip(at(n)) {
                *a += v;
            }
        }
        s
    };
    let tail_at = |cut: i64| -> Vec<Complex64> {
        let c = cut as f64;
        let f = hurwitz_zeta(-d_n, c + 1.0) * (-d_n * c.ln()).exp();
        (0..w).map(|k| (at(cut)[k] + at(-cut)[k]) * f).collect()
    };
    let numeric = partial(lam);
    let tail = tail_at(lam);
    let half_cut = lam / 2;
    let (ph, th) = (partial(half_cut), tail_at(half_cut));
    let half = (0..w).map(|k| analytic[k] + ph[k] + th[k]).collect();
    Ok(Parts { analytic, numeric, tail, half })
}

/// Panels covering `[0, Λ]`: fine near the cut-off transition, geometric beyond.
fn panels(lambda: f64, outer: f64) -> Vec<(f64, f64)> {
    let mut edges = vec![0.0];
    let fine_end = (2.0 * outer).max(2.0);
    let mut x = 0.0;
    while x < fine_end - 1e-12 {
        x += 0.25;
        edges.push(x);
    }
    while x < lambda {
        x = (x * 1.5).min(lambda);
        edges.push(x);
    }
    edges.windows(2).map(|p| (p[0], p[1])).collect()
}

/// `fp ∫_0^∞ χ(ξ) ξ^d log^l ξ dξ`.
fn continuous_fp(chi: &crate::cutoff::Cutoff, d: Complex64, l: usize) -> Complex64 {
    let f = |xi: f64| abs_pow(xi, d) * xi.ln().powi(l as i32);
    let (xs, ws) = gauss_legendre(32);
    let mut acc = czero();
    // χ·f on [inner, 1] and (χ − 1)·f on [1, outer], eight panels each.
    let pieces = [(chi.inner.min(1.0), 1.0, 0.0), (1.0, chi.outer.max(1.0), -1.0)];
    for (a, b, shift) in pieces {
        if b <= a {
            continue;
        }
        let h = (b - a) / 8.0;
        for p in 0..8 {
            let lo = a + p as f64 * h;
            for (x, wt) in xs.iter().zip(&ws) {
                let xi = lo + 0.5 * h * (x + 1.0);
                acc += f(xi) * (chi.eval(xi) + shift) * (wt * 0.5 * h);
            }
        }
    }
    // fp ∫_1^∞ ξ^d log^l ξ dξ = l!/(−d−1)^{l+1}, zero at d = −1.
    if (d + 1.0).norm() > 1e-9 {
        let fact: f64 = (1..=l).map(|v| v as f64).product();
        acc += (-d - 1.0).powi(-(l as i32) - 1) * fact;
    }
    acc
}

fn continuous_parts(sigma: &LogPolyhomSymbol, ct: &ComponentTraces, lambda: usize) -> Result<Parts, TraceError> {
    let w = ct.width;
    let chi = sigma.cutoff();
    let analytic = ct.weighted_sum(|d, l| continuous_fp(&chi, d, l));
    if sigma.exact().is_none() {
        let z = vec![czero(); w];
        return Ok(Parts { analytic, numeric: z.clone(), tail: z.clone(), half: z });
    }
    let d_n = check_summable(sigma)?;
    let integral = |lam: f64| -> Vec<Complex64> {
        let (xs, ws) = gauss_legendre(24);
        let ps = panels(lam, chi.outer);
        ps.par_iter()
            .map(|(a, b)| {
                let mut s = vec![czero(); w];
                let half = 0.5 * (b - a);
                for (x, wt) in xs.iter().zip(&ws) {
                    let xi = a + half * (x + 1.0);
                    for sign in [1.0, -1.0] {
                        for (o, v) in s.iter_mut().zip(remainder(sigma, ct, sign * xi)) {
                            *o += v * (wt * half);
                        }
                    }
                }
                s
            })
            .reduce(|| vec![czero(); w], |a, b| a.iter().zip(&b).map(|(x, y)| x + y).collect())
    };
    let tail_at = |lam: f64| -> Vec<Complex64> {
        let rp = remainder(sigma, ct, lam);
        let rm = remainder(sigma, ct, -lam);
        (0..w).map(|k| (rp[k] + rm[k]) * lam / (-d_n - 1.0)).collect()
    };
    let lam = lambda.max(2) as f64;
    let numeric = integral(lam);
    let tail = tail_at(lam);
    let (ih, th) = (integral(lam / 2.0), tail_at(lam / 2.0));
    let half = (0..w).map(|k| analytic[k] + ih[k] + th[k]).collect();
    Ok(Parts { analytic, numeric, tail, half })
}

fn broadcast(v: Vec<Complex64>, g: usize) -> Vec<Complex64> {
    if v.len() == g {
        v
    } else {
        vec![v[0]; g]
    }
}

fn mean_integral(v: &[Complex64]) -> Complex64 {
    v.iter().sum::<Complex64>() * (2.0 * PI / v.len() as f64)
}

/// Cut-off density `TR_x(σ)` on the grid.
pub fn cutoff_trace_density(sigma: &LogPolyhomSymbol, opts: &TraceOptions) -> Result<DensityReport, TraceError> {
    let obs = obstruction(sigma);
    if obs > RESIDUE_TOL && !opts.accept_obstruction {
        return Err(TraceError::ResidueObstruction(obs));
    }
    let g = sigma.grid_size();
    let ct = ComponentTraces::new(sigma);
    let parts = match opts.mode {
        TraceMode::Toroidal => toroidal_parts(sigma, &ct, opts.lambda)?,
        TraceMode::Continuous => continuous_parts(sigma, &ct, opts.lambda)?,
    };
    let scale = 1.0 / (2.0 * PI);
    let analytic: Vec<Complex64> = broadcast(parts.analytic, g).into_iter().map(|v| v * scale).collect();
    let numeric: Vec<Complex64> = broadcast(parts.numeric, g).into_iter().map(|v| v * scale).collect();
    let tail: Vec<Complex64> = broadcast(parts.tail, g).into_iter().map(|v| v * scale).collect();
    let half: Vec<Complex64> = broadcast(parts.half, g).into_iter().map(|v| v * scale).collect();
    let values: Vec<Complex64> = (0..g).map(|k| analytic[k] + numeric[k] + tail[k]).collect();
    let drift = (0..g).map(|k| (values[k] - half[k]).norm()).fold(0.0, f64::max) * 2.0 * PI;
    let breakdown = Breakdown {
        analytic: mean_integral(&analytic),
        numeric: mean_integral(&numeric),
        tail: mean_integral(&tail),
        residue_obstruction: obs,
    };
    Ok(DensityReport::new(&values, drift, breakdown))
}

fn is_integer_order(a: Complex64) -> bool {
    a.im.abs() < DEGREE_TOL && (a.re - a.re.round()).abs() < DEGREE_TOL
}

/// Canonical trace `∫ TR_x dx`; defined for non-integer order or vanishing degree `−1` trace.
pub fn canonical_trace(sigma: &LogPolyhomSymbol, opts: &TraceOptions) -> Result<DensityReport, TraceError> {
    let obs = obstruction(sigma);
    if is_integer_order(sigma.order()) && obs > RESIDUE_TOL {
        return Err(TraceError::ResidueObstruction(obs));
    }
    cutoff_trace_density(sigma, opts)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedTraceReport {
    pub value: Complex64,
    pub density: DensityReport,
    /// `∫ TR_x(A) dx`.
    pub cutoff_part: Complex64,
    /// Residue-type correction from the weight.
    pub correction: Complex64,
    pub weight_order: f64,
}

fn weight_order(q: &PolyhomSymbol) -> Result<f64, TraceError> {
    let a = q.order();
    if a.re <= 0.0 || a.im.abs() > DEGREE_TOL {
        return Err(TraceError::NonPositiveWeight(a));
    }
    Ok(a.re)
}

fn log_free_part(s: &LogPolyhomSymbol) -> Result<LogPolyhomSymbol, SymbolError> {
    let rows = s.components().iter().map(|r| vec![r[0].clone()]).collect();
    Ok(LogPolyhomSymbol::new(s.order(), rows, None)?.with_cutoff(s.cutoff()))
}

/// Density of `Σ_{l≤k_A} (−1)^{l+1} [A ⋆ (log^{l+1} Q)|_{l=0}]_{−1,l} / ((l+1) q^{l+1})`.
///
/// For classical `A` this is `−res_x(A ⋆ log Q)/q`.
fn weight_correction_density(
    sigma_a: &LogPolyhomSymbol,
    log_q: &LogPolyhomSymbol,
    q: f64,
) -> Result<Vec<Complex64>, TraceError> {
    let g = sigma_a.grid_size();
    let mut out = vec![czero(); g];
    if degree_index(sigma_a, Complex64::new(-1.0, 0.0)).is_none() {
        return Ok(out);
    }
    let depth = sigma_a.depth().min(log_q.depth());
    let mut power = log_q.truncate(depth)?;
    for l in 0..=sigma_a.log_type() {
        if l > 0 {
            power = star_product(&power, log_q, depth)?;
        }
        let prod = star_product(sigma_a, &log_free_part(&power)?, depth)?;
        let d = degree_minus_one_density(&prod, l);
        let sign = if l % 2 == 0 { -1.0 } else { 1.0 };
        let f = sign / ((l + 1) as f64 * q.powi(l as i32 + 1));
        for (o, v) in out.iter_mut().zip(d) {
            *o += v * f;
        }
    }
    Ok(out)
}

/// `tr^Q(A) = ∫ [TR_x(A) + weight correction] dx`.
pub fn weighted_trace(
    sigma_a: &LogPolyhomSymbol,
    q_sym: &PolyhomSymbol,
    cut: SpectralCut,
    opts: &TraceOptions,
) -> Result<WeightedTraceReport, TraceError> {
    let q = weight_order(q_sym)?;
    let depth = sigma_a.depth().min(q_sym.depth());
    let log_q = log_symbol(q_sym, cut, depth)?;
    weighted_trace_with_log(sigma_a, &log_q, q, opts)
}

/// As [`weighted_trace`] with a precomputed `log Q` of order `q`.
pub fn weighted_trace_with_log(
    sigma_a: &LogPolyhomSymbol,
    log_q: &LogPolyhomSymbol,
    q: f64,
    opts: &TraceOptions,
) -> Result<WeightedTraceReport, TraceError> {
    let tr = cutoff_trace_density(sigma_a, &opts.accepting_obstruction())?;
    if tr.error_estimate > LAMBDA_DRIFT_TOL {
        return Err(TraceError::LambdaDrift(tr.error_estimate));
    }
    let corr = weight_correction_density(sigma_a, log_q, q)?;
    let values: Vec<Complex64> = tr.values().iter().zip(&corr).map(|(a, b)| a + b).collect();
    let correction = mean_integral(&corr);
    let mut breakdown = tr.breakdown.clone();
    breakdown.analytic += correction;
    let density = DensityReport::new(&values, tr.error_estimate, breakdown);
    Ok(WeightedTraceReport { value: density.integral, cutoff_part: tr.integral, correction, weight_order: q, density })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct LaurentFit {
    /// Coefficients of `z^{-2}, z^{-1}, z^0, …, z^4`.
    pub coeffs: Vec<Complex64>,
    pub residual: f64,
    pub samples: Vec<(Complex64, Complex64)>,
}

impl LaurentFit {
    pub fn coeff(&self, power: i32) -> Complex64 {
        self.coeffs[(power + 2) as usize]
    }
}

/// Sample points `±k·h·d/q` of the direct method, `d ≤ 1` the distance from `a` to the nearest
/// integer other than `a` itself.
pub const DIRECT_STEP: f64 = 0.01;
pub const DIRECT_POINTS: usize = 5;

/// Least-squares fit of `Σ_{p=p₀}^{4} c_p z^p` to the samples, `p₀ = −2` or `−1`.
pub fn laurent_fit(samples: &[(Complex64, Complex64)], double_pole: bool) -> LaurentFit {
    let lo: i32 = if double_pole { -2 } else { -1 };
    let powers: Vec<i32> = (lo..=4).collect();
    let m = DMatrix::from_fn(samples.len(), powers.len(), |r, c| samples[r].0.powi(powers[c]));
    let b = DVector::from_iterator(samples.len(), samples.iter().map(|s| s.1));
    let svd = m.clone().svd(true, true);
    let x = svd.solve(&b, 1e-14).expect("svd solve");
    let fitted = &m * &x;
    let residual = (fitted - &b).iter().fold(0.0_f64, |acc, v| acc.max(v.norm()));
    let mut coeffs = vec![czero(); 7];
    for (c, p) in powers.iter().enumerate() {
        coeffs[(p + 2) as usize] = x[c];
    }
    LaurentFit { coeffs, residual, samples: samples.to_vec() }
}

/// `fp_{z=0} TR(A ⋆ Q^{−z})` from samples of the cut-off trace off the pole.
pub fn weighted_trace_direct(
    sigma_a: &LogPolyhomSymbol,
    q_sym: &PolyhomSymbol,
    cut: SpectralCut,
    opts: &TraceOptions,
) -> Result<LaurentFit, TraceError> {
    let q = weight_order(q_sym)?;
    let depth = sigma_a.depth().min(q_sym.depth());
    // Poles of z ↦ TR(A Q^{−z}) sit where a − qz is an integer.
    let a = sigma_a.order();
    let k = a.re.round();
    let d = if (a - k).norm() < DEGREE_TOL { 1.0 } else { (a - k).norm().min(1.0) };
    let d = [k - 1.0, k + 1.0].iter().fold(d, |m, &j| m.min((a - j).norm()));
    let zs: Vec<Complex64> = (1..=DIRECT_POINTS)
        .flat_map(|k| {
            let z = k as f64 * DIRECT_STEP * d / q;
            [Complex64::new(z, 0.0), Complex64::new(-z, 0.0)]
        })
        .collect();
    let samples: Result<Vec<(Complex64, Complex64)>, TraceError> = zs
        .par_iter()
        .map(|&z| {
            let qz = complex_power_symbol(q_sym, -z, cut, depth)?;
            let prod = star_product(sigma_a, qz.as_log(), depth)?;
            let tr = cutoff_trace_density(&prod, &opts.accepting_obstruction())?;
            Ok((z, tr.integral))
        })
        .collect();
    let samples = samples?;
    let fit = laurent_fit(&samples, sigma_a.log_type() > 0);
    if fit.residual > FIT_TOL * fit.coeff(0).norm().max(1.0) {
        return Err(TraceError::FitResidual { residual: fit.residual, samples });
    }
    Ok(fit)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CoboundaryReport {
    /// `−(1/q) res(A ⋆ [B, log Q])`.
    pub value: Complex64,
    /// `(1/q) res(B ⋆ [A, log Q])`.
    pub swapped: Complex64,
    /// `tr^Q([A, B])` from the defect formula.
    pub weighted: Complex64,
}

/// Weighted trace of a commutator through residues, checked against the swapped form and the
/// weighted trace of the commutator symbol.
///
/// The sign follows from `fp_{z=0} TR(A [B, Q^{−z}])` with `[B, Q^{−z}] = −z [B, log Q] + O(z²)`.
pub fn weighted_trace_commutator(
    sigma_a: &LogPolyhomSymbol,
    sigma_b: &LogPolyhomSymbol,
    q_sym: &PolyhomSymbol,
    cut: SpectralCut,
    opts: &TraceOptions,
) -> Result<CoboundaryReport, TraceError> {
    let q = weight_order(q_sym)?;
    let depth = sigma_a.depth().min(sigma_b.depth()).min(q_sym.depth());
    let log_q = log_symbol(q_sym, cut, depth)?;
    let cb = commutator_symbol(sigma_b, &log_q, depth)?;
    let ca = commutator_symbol(sigma_a, &log_q, depth)?;
    let value = -residue(&star_product(sigma_a, &cb, depth)?) / q;
    let swapped = residue(&star_product(sigma_b, &ca, depth)?) / q;
    if (value - swapped).norm() > COBOUNDARY_TOL {
        return Err(TraceError::CoboundaryMismatch { lhs: value, rhs: swapped });
    }
    let ab = commutator_symbol(sigma_a, sigma_b, depth)?;
    let weighted = weighted_trace_with_log(&ab, &log_q, q, opts)?.value;
    if (value - weighted).norm() > COMMUTATOR_TRACE_TOL {
        return Err(TraceError::CoboundaryMismatch { lhs: value, rhs: weighted });
    }
    Ok(CoboundaryReport { value, swapped, weighted })
}
