//! Holomorphic functional calculus on symbols: resolvent components, complex powers,
//! logarithms and sectorial projectors.
//!
//! Branch convention: `λ^z = |λ|^z e^{iz arg λ}` with `arg λ ∈ [θ−2π, θ)`.

use num_complex::Complex64;
use rayon::prelude::*;
use std::f64::consts::PI;

use crate::grid::PeriodicMatrixFunction;
use crate::linalg::{distance_to_ray, eigenvalues, frob, matfun_cut, smallest_singular_value, CMat, MatFn, I};
use crate::quad::gauss_legendre;
use crate::star::{right_parametrix, star_classical, xi_derivatives};
use crate::symbol::{ExactEvaluator, HomogComponent, LogPolyhomSymbol, PolyhomSymbol, SymbolError};

/// Minimal distance from a leading eigenvalue to the cut ray.
pub const ADMISSIBLE_DIST: f64 = 1e-8;
/// Relative change between node doublings accepted as converged.
pub const CONTOUR_TOL: f64 = 1e-8;
/// Step for the `z`-derivative at `0`.
pub const LOG_STEP: f64 = 1e-3;
/// Tolerance of per-mode matrix functions in exact evaluators.
const MATFUN_TOL: f64 = 1e-13;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum HoloError {
    #[error("cut θ = {theta} is not admissible: eigenvalue {eig} at gridpoint {gridpoint} (ξ > 0: {positive}) lies {dist:e} from the ray")]
    Inadmissible { theta: f64, eig: Complex64, gridpoint: usize, positive: bool, dist: f64 },
    #[error("cut θ = {theta} is not admissible: eigenvalue {eig} of mode {mode} lies {dist:e} from the ray")]
    InadmissibleMode { theta: f64, eig: Complex64, mode: i64, dist: f64 },
    #[error("λ = {lambda} is within {sv:e} of the leading spectrum")]
    NearSpectrum { lambda: Complex64, sv: f64 },
    #[error("contour quadrature did not converge (relative change {0:e})")]
    NoConvergence(f64),
    #[error("operator order must have positive real part, got {0}")]
    NonPositiveOrder(Complex64),
    #[error("cuts must satisfy θ < φ < θ + 2π, got θ = {0}, φ = {1}")]
    BadCone(f64, f64),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// Cut along the ray `L_θ = {ρ e^{iθ}}`.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SpectralCut {
    pub theta: f64,
}

impl Default for SpectralCut {
    fn default() -> Self {
        SpectralCut { theta: PI }
    }
}

impl SpectralCut {
    pub fn new(theta: f64) -> Self {
        SpectralCut { theta }
    }

    /// Leading eigenvalues at every `(x_k, ±1)` stay away from the ray.
    pub fn check_symbol(&self, sigma: &PolyhomSymbol) -> Result<(), HoloError> {
        let lead = sigma.comp(0);
        for positive in [true, false] {
            let f = lead.side(positive);
            let n = if f.is_constant_repr() { 1 } else { f.grid_size() };
            for k in 0..n {
                for eig in eigenvalues(f.sample(k)) {
                    let dist = distance_to_ray(eig, self.theta);
                    if dist <= ADMISSIBLE_DIST {
                        return Err(HoloError::Inadmissible { theta: self.theta, eig, gridpoint: k, positive, dist });
                    }
                }
            }
        }
        Ok(())
    }

    /// Per-mode eigenvalues `|n| ≤ max_mode` of a multiplier stay away from the ray.
    pub fn check_modes(&self, sigma: &LogPolyhomSymbol, max_mode: i64) -> Result<(), HoloError> {
        if let Some(ExactEvaluator::Multiplier(f)) = sigma.exact() {
            for n in -max_mode..=max_mode {
                for eig in eigenvalues(&f(n as f64)) {
                    let dist = distance_to_ray(eig, self.theta);
                    if dist <= ADMISSIBLE_DIST {
                        return Err(HoloError::InadmissibleMode { theta: self.theta, eig, mode: n, dist });
                    }
                }
            }
        }
        Ok(())
    }
}

/// Nodes `λ_i` and, per functional, weights `w_i` approximating `Σ_i w_i f(λ_i)`.
#[derive(Clone, Debug)]
pub struct Quadrature {
    pub lambdas: Vec<Complex64>,
    pub weights: Vec<Vec<Complex64>>,
}

/// Quadrature for `Γ_{r,θ}`: the two rays (shared nodes in `u = log(ρ/r)`, panels of unit
/// width) and the clockwise circle of radius `r`. The rays stop where `ρ^{Re z}` has decayed
/// by `e^{-40}` past the spectral scale.
#[derive(Clone, Debug)]
pub struct Contour {
    pub r: f64,
    pub theta: f64,
    /// `log(scale / r)`.
    pub u_scale: f64,
    pub nodes_per_panel: usize,
}

impl Contour {
    pub fn new(r: f64, theta: f64, scale: f64, nodes_per_panel: usize) -> Self {
        Contour { r, theta, u_scale: (scale / r).ln().max(0.0), nodes_per_panel }
    }

    /// Weights for `(i/2π) ∫_Γ λ^z f(λ) dλ`, one row per `z`.
    pub fn power_quadrature(&self, zs: &[Complex64]) -> Quadrature {
        let (xs, ws) = gauss_legendre(self.nodes_per_panel);
        let pref = I / (2.0 * PI);
        let theta = self.theta;
        let mut lambdas = Vec::new();
        let mut weights: Vec<Vec<Complex64>> = vec![Vec::new(); zs.len()];
        let decay = zs.iter().map(|z| -z.re).fold(f64::INFINITY, f64::min).max(0.1);
        let u_max = self.u_scale + 40.0 / decay.min(1.0);
        let ray_panels = u_max.ceil() as usize;
        let hu = u_max / ray_panels as f64;
        let dir = Complex64::from_polar(1.0, theta);
        for p in 0..ray_panels {
            for (x, w) in xs.iter().zip(&ws) {
                let u = hu * (p as f64 + 0.5 * (x + 1.0));
                let rho = self.r * u.exp();
                lambdas.push(dir * rho);
                for (row, &z) in weights.iter_mut().zip(zs) {
                    // Inward along arg θ plus outward along arg θ − 2π.
                    let jump = (I * z * (theta - 2.0 * PI)).exp() - (I * z * theta).exp();
                    let rz = (z * rho.ln()).exp();
                    row.push(pref * rz * jump * dir * rho * (0.5 * hu * w));
                }
            }
        }
        let arc_panels = 8;
        let ht = 2.0 * PI / arc_panels as f64;
        for p in 0..arc_panels {
            for (x, w) in xs.iter().zip(&ws) {
                let t = theta - 2.0 * PI + ht * (p as f64 + 0.5 * (x + 1.0));
                let lambda = Complex64::from_polar(self.r, t);
                lambdas.push(lambda);
                for (row, &z) in weights.iter_mut().zip(zs) {
                    let lz = (z * Complex64::new(self.r.ln(), t)).exp();
                    // Traversed from t = θ to t = θ − 2π.
                    row.push(-pref * lz * I * lambda * (0.5 * ht * w));
                }
            }
        }
        Quadrature { lambdas, weights }
    }
}

/// Weights for `(1/2πi) ∮ λ^{-1} f(λ) dλ` over the clockwise boundary of the truncated cone
/// `{ρ e^{it} : ρ ≥ r, θ < t < φ}`.
pub fn cone_quadrature(r: f64, theta: f64, phi: f64, scale: f64, p: usize) -> Quadrature {
    let u_max = (scale / r).ln().max(0.0) + 40.0;
    let (xs, ws) = gauss_legendre(p);
    let pref = Complex64::new(0.0, -1.0 / (2.0 * PI));
    let mut lambdas = Vec::new();
    let mut row = Vec::new();
    let ray_panels = u_max.ceil() as usize;
    let hu = u_max / ray_panels as f64;
    for k in 0..ray_panels {
        for (x, w) in xs.iter().zip(&ws) {
            let u = hu * (k as f64 + 0.5 * (x + 1.0));
            let rho = r * u.exp();
            let wu = 0.5 * hu * w;
            // Inward along θ, outward along φ; λ^{-1} dλ = ±du.
            lambdas.push(Complex64::from_polar(rho, theta));
            row.push(-pref * wu);
            lambdas.push(Complex64::from_polar(rho, phi));
            row.push(pref * wu);
        }
    }
    let arc_panels = 4;
    let ht = (phi - theta) / arc_panels as f64;
    for k in 0..arc_panels {
        for (x, w) in xs.iter().zip(&ws) {
            let t = theta + ht * (k as f64 + 0.5 * (x + 1.0));
            lambdas.push(Complex64::from_polar(r, t));
            // λ^{-1} dλ = i dt, traversed from θ to φ.
            row.push(pref * I * (0.5 * ht * w));
        }
    }
    Quadrature { lambdas, weights: vec![row] }
}

type Sides = [PeriodicMatrixFunction; 2];

/// Precomputed `λ`-independent data of `σ − λ`.
struct ResolventData {
    lead: Sides,
    dxi: Vec<Vec<Sides>>,
    depth: usize,
}

impl ResolventData {
    fn new(sigma: &PolyhomSymbol, depth: usize) -> Result<Self, HoloError> {
        if depth == 0 || depth > sigma.depth() {
            return Err(SymbolError::DepthTooLarge { requested: depth, max_valid: sigma.depth() }.into());
        }
        let c = sigma.comp(0);
        Ok(ResolventData { lead: [c.plus.clone(), c.minus.clone()], dxi: xi_derivatives(sigma, depth), depth })
    }

    fn at(&self, lambda: Complex64) -> Result<Vec<Sides>, HoloError> {
        let mut inv = Vec::with_capacity(2);
        for f in &self.lead {
            let shifted = f.map(|m| {
                let mut s = m.clone();
                for i in 0..s.nrows() {
                    s[(i, i)] -= lambda;
                }
                s
            });
            let n = if shifted.is_constant_repr() { 1 } else { shifted.grid_size() };
            for k in 0..n {
                let sv = smallest_singular_value(shifted.sample(k));
                if sv <= 1e-10 * (1.0 + lambda.norm()) {
                    return Err(HoloError::NearSpectrum { lambda, sv });
                }
            }
            inv.push(shifted.inverse().map_err(|_| HoloError::NearSpectrum { lambda, sv: 0.0 })?);
        }
        let minus = inv.pop().unwrap();
        let plus = inv.pop().unwrap();
        Ok(right_parametrix([plus, minus], &self.dxi, self.depth))
    }
}

/// Resolvent components `b_{−a−j}(x, ±1, λ)`, `j < depth`, of `(σ − λ) ⋆ b ∼ I`.
pub fn resolvent_symbols(sigma: &PolyhomSymbol, lambda: Complex64, depth: usize) -> Result<Vec<HomogComponent>, HoloError> {
    let data = ResolventData::new(sigma, depth)?;
    let b = data.at(lambda)?;
    Ok(b.into_iter()
        .enumerate()
        .map(|(j, [p, m])| HomogComponent::new(-sigma.order() - j as f64, p, m))
        .collect())
}

fn add_sides(acc: &mut [Vec<Sides>], other: &[Vec<Sides>]) {
    for (a, o) in acc.iter_mut().zip(other) {
        for (x, y) in a.iter_mut().zip(o) {
            x[0] = x[0].add(&y[0]);
            x[1] = x[1].add(&y[1]);
        }
    }
}

/// `Σ_i w_i b(λ_i)` for every weight row.
fn integrate_resolvent(data: &ResolventData, q: &Quadrature) -> Result<Vec<Vec<Sides>>, HoloError> {
    let nf = q.weights.len();
    let partial: Result<Vec<Vec<Vec<Sides>>>, HoloError> = q
        .lambdas
        .par_iter()
        .enumerate()
        .map(|(i, &lambda)| {
            let b = data.at(lambda)?;
            Ok((0..nf)
                .map(|f| {
                    let w = q.weights[f][i];
                    b.iter().map(|[p, m]| [p.scale(w), m.scale(w)]).collect()
                })
                .collect())
        })
        .collect();
    let partial = partial?;
    let mut it = partial.into_iter();
    let mut acc = it.next().expect("nonempty quadrature");
    for p in it {
        add_sides(&mut acc, &p);
    }
    Ok(acc)
}

fn max_change(a: &[Vec<Sides>], b: &[Vec<Sides>]) -> f64 {
    let mut worst: f64 = 0.0;
    for (ra, rb) in a.iter().zip(b) {
        for (x, y) in ra.iter().zip(rb) {
            for s in 0..2 {
                let diff = x[s].sub(&y[s]).max_norm();
                worst = worst.max(diff / y[s].max_norm().max(1.0));
            }
        }
    }
    worst
}

/// Integrates with `8, 16, 32, 64` nodes per panel until two successive results agree.
fn converge(data: &ResolventData, build: impl Fn(usize) -> Quadrature) -> Result<Vec<Vec<Sides>>, HoloError> {
    let mut prev = integrate_resolvent(data, &build(8))?;
    let mut change = f64::INFINITY;
    for p in [16usize, 32, 64] {
        let next = integrate_resolvent(data, &build(p))?;
        change = max_change(&prev, &next);
        prev = next;
        if change < CONTOUR_TOL {
            return Ok(prev);
        }
    }
    Err(HoloError::NoConvergence(change))
}

/// Inner radius and size of the leading spectrum.
fn contour_scales(sigma: &PolyhomSymbol) -> (f64, f64) {
    let lead = sigma.comp(0);
    let mut smin = f64::INFINITY;
    let mut smax: f64 = 0.0;
    for positive in [true, false] {
        let f = lead.side(positive);
        let n = if f.is_constant_repr() { 1 } else { f.grid_size() };
        for k in 0..n {
            smin = smin.min(smallest_singular_value(f.sample(k)));
            smax = smax.max(frob(f.sample(k)));
        }
    }
    (0.5 * smin, smax.max(1.0))
}

/// Shift `k ≥ 0` with `Re(z − k) ≤ −1`.
fn power_shift(z: Complex64) -> usize {
    if z.re > -1.0 {
        (z.re + 1.0).ceil() as usize
    } else {
        0
    }
}

fn sides_to_symbol(order: Complex64, comps: Vec<Sides>) -> Result<PolyhomSymbol, HoloError> {
    let cs = comps
        .into_iter()
        .enumerate()
        .map(|(j, [p, m])| HomogComponent::new(order - j as f64, p, m))
        .collect();
    Ok(PolyhomSymbol::new(order, cs, None)?)
}

fn check_order(sigma: &PolyhomSymbol) -> Result<(), HoloError> {
    if sigma.order().re <= 0.0 {
        return Err(HoloError::NonPositiveOrder(sigma.order()));
    }
    Ok(())
}

/// Components of the raw Cauchy integrals `A^w`, `Re w < 0`, at every `w` in `ws`.
fn raw_powers(sigma: &PolyhomSymbol, ws: &[Complex64], cut: SpectralCut, depth: usize) -> Result<Vec<Vec<Sides>>, HoloError> {
    let data = ResolventData::new(sigma, depth)?;
    let (r, scale) = contour_scales(sigma);
    converge(&data, |p| Contour::new(r, cut.theta, scale, p).power_quadrature(ws))
}

fn sigma_power(sigma: &PolyhomSymbol, k: usize, depth: usize) -> Result<Option<PolyhomSymbol>, HoloError> {
    if k == 0 {
        return Ok(None);
    }
    let base = sigma.truncate(depth)?;
    let mut acc = base.clone();
    for _ in 1..k {
        acc = star_classical(&acc, &base, depth)?;
    }
    Ok(Some(acc))
}

fn multiplier_matfun(sigma: &LogPolyhomSymbol, f: MatFn, theta: f64) -> Option<ExactEvaluator> {
    match sigma.exact() {
        Some(ExactEvaluator::Multiplier(e)) => {
            let e = e.clone();
            Some(ExactEvaluator::multiplier(move |xi| {
                let m = e(xi);
                matfun_cut(&m, f, theta, MATFUN_TOL).unwrap_or_else(|_| CMat::from_element(m.nrows(), m.ncols(), Complex64::new(f64::NAN, f64::NAN)))
            }))
        }
        _ => None,
    }
}

/// Symbol of `A_θ^z` truncated to `depth` components.
pub fn complex_power_symbol(sigma: &PolyhomSymbol, z: Complex64, cut: SpectralCut, depth: usize) -> Result<PolyhomSymbol, HoloError> {
    check_order(sigma)?;
    cut.check_symbol(sigma)?;
    if z == Complex64::new(0.0, 0.0) {
        return Ok(PolyhomSymbol::identity(sigma.grid_size(), sigma.rank(), depth).with_cutoff(sigma.cutoff()));
    }
    let k = power_shift(z);
    let w = z - k as f64;
    let raw = raw_powers(sigma, &[w], cut, depth)?.pop().unwrap();
    let mut out = sides_to_symbol(sigma.order() * w, raw)?;
    if let Some(p) = sigma_power(sigma, k, depth)? {
        out = star_classical(&p, &out, depth)?;
    }
    let exact = multiplier_matfun(sigma.as_log(), MatFn::Power(z), cut.theta);
    Ok(out.with_exact(exact).with_cutoff(sigma.cutoff()))
}

/// Real power `A_θ^t`.
pub fn real_power_symbol(sigma: &PolyhomSymbol, t: f64, cut: SpectralCut, depth: usize) -> Result<PolyhomSymbol, HoloError> {
    complex_power_symbol(sigma, Complex64::new(t, 0.0), cut, depth)
}

/// Symbol of `log_θ A = a log|ξ| I + σ₀`, from the `z`-derivative of `A · A^{z−1}` at `z = 0`.
pub fn log_symbol(sigma: &PolyhomSymbol, cut: SpectralCut, depth: usize) -> Result<LogPolyhomSymbol, HoloError> {
    check_order(sigma)?;
    cut.check_symbol(sigma)?;
    let h = LOG_STEP;
    let m1 = Complex64::new(-1.0, 0.0);
    let ws = [m1 + h, m1 - h, m1 + h / 2.0, m1 - h / 2.0];
    let raw = raw_powers(sigma, &ws, cut, depth)?;
    let deriv: Vec<Sides> = (0..depth)
        .map(|j| {
            let mut out: Vec<PeriodicMatrixFunction> = Vec::with_capacity(2);
            for s in 0..2 {
                let d1 = raw[0][j][s].sub(&raw[1][j][s]).scale(Complex64::new(1.0 / (2.0 * h), 0.0));
                let d2 = raw[2][j][s].sub(&raw[3][j][s]).scale(Complex64::new(1.0 / h, 0.0));
                out.push(d2.scale(Complex64::new(4.0 / 3.0, 0.0)).sub(&d1.scale(Complex64::new(1.0 / 3.0, 0.0))));
            }
            let minus = out.pop().unwrap();
            let plus = out.pop().unwrap();
            [plus, minus]
        })
        .collect();
    let d = sides_to_symbol(-sigma.order(), deriv)?;
    let classical = star_classical(&sigma.truncate(depth)?, &d, depth)?;
    let g = sigma.grid_size();
    let m = sigma.rank();
    let zero = Complex64::new(0.0, 0.0);
    let a_id = PeriodicMatrixFunction::constant(g, CMat::identity(m, m) * sigma.order());
    let mut rows: Vec<Vec<HomogComponent>> = Vec::with_capacity(depth);
    for j in 0..depth {
        let mut c = classical.comp(j).clone();
        c.degree = Complex64::new(-(j as f64), 0.0);
        if j == 0 {
            rows.push(vec![c, HomogComponent::new(zero, a_id.clone(), a_id.clone())]);
        } else {
            rows.push(vec![c]);
        }
    }
    let exact = multiplier_matfun(sigma.as_log(), MatFn::Log, cut.theta);
    Ok(LogPolyhomSymbol::new(zero, rows, exact)?.with_cutoff(sigma.cutoff()))
}

/// Symbol of `Π_{θ,φ}(A) = A · (1/2πi) ∫_{Γ_{θ,φ}} λ^{-1} (A − λ)^{-1} dλ`.
pub fn sectorial_projector_symbol(sigma: &PolyhomSymbol, theta: f64, phi: f64, depth: usize) -> Result<PolyhomSymbol, HoloError> {
    check_order(sigma)?;
    if !(theta < phi && phi < theta + 2.0 * PI) {
        return Err(HoloError::BadCone(theta, phi));
    }
    SpectralCut::new(theta).check_symbol(sigma)?;
    SpectralCut::new(phi).check_symbol(sigma)?;
    let data = ResolventData::new(sigma, depth)?;
    let (r, scale) = contour_scales(sigma);
    let b = converge(&data, |p| cone_quadrature(r, theta, phi, scale, p))?.pop().unwrap();
    let bsym = sides_to_symbol(-sigma.order(), b)?;
    let out = star_classical(&sigma.truncate(depth)?, &bsym, depth)?;
    let exact = match sigma.exact() {
        Some(ExactEvaluator::Multiplier(e)) => {
            let e = e.clone();
            Some(ExactEvaluator::multiplier(move |xi| {
                let m = e(xi);
                let nan = || CMat::from_element(m.nrows(), m.ncols(), Complex64::new(f64::NAN, f64::NAN));
                match (matfun_cut(&m, MatFn::Log, theta, MATFUN_TOL), matfun_cut(&m, MatFn::Log, phi, MATFUN_TOL)) {
                    (Ok(a), Ok(b)) => (a - b) / Complex64::new(0.0, -2.0 * PI),
                    _ => nan(),
                }
            }))
        }
        _ => None,
    };
    Ok(out.with_exact(exact).with_cutoff(sigma.cutoff()))
}
