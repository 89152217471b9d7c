//! Spectral ground truth for Fourier multipliers on the circle.
//!
//! Zeta functions are continued by splitting the mode sum at `|n| = M`. Below the split each
//! mode contributes `Σ_i λ_i(σ(n))^{−s}` from its eigenvalues. Above it, `tr σ(±n)^{−s} =
//! n^{−as} g_±(1/n)` with `g_±` analytic at 0; its Taylor coefficients come from a Cauchy
//! integral over the truncated symbol expansion, and each power of `n` is summed by Hurwitz ζ.
//!
//! Nothing here uses contour-integral functional calculus: matrix powers enter only through
//! eigenvalues, so the results are independent of the symbolic route they check.

use num_complex::Complex64;
use psido_core::holo::SpectralCut;
use psido_core::linalg::{distance_to_ray, eigenvalues, frob, log_branch, pow_branch, CMat};
use psido_core::special::hurwitz_zeta;
use psido_core::star::star_classical;
use psido_core::symbol::{ExactEvaluator, PolyhomSymbol, SymbolError};
use std::f64::consts::PI;
use std::sync::Arc;

pub const DEFAULT_MODES: usize = 4096;
pub const DEFAULT_TERMS: usize = 6;
/// Step of the centered `s`-difference for `ζ′(0)`.
pub const S_STEP: f64 = 1e-4;
/// Step of the symmetric `z`-average for finite parts.
pub const Z_STEP: f64 = 1e-3;
pub const POLE_GUARD: f64 = 1e-3;
/// Radius and node count of the Cauchy circle in `u = 1/n`.
const CAUCHY_RADIUS: f64 = 0.125;
const CAUCHY_POINTS: usize = 64;
/// Eigenvalues closer than this to the cut are rejected.
const CUT_CLEARANCE: f64 = 1e-8;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum OracleError {
    #[error("operator has no closed-form mode map")]
    NoModeMap,
    #[error("eigenvalue {eig} of mode {mode} lies on the cut at angle {theta}")]
    OnCut { mode: i64, eig: Complex64, theta: f64 },
    #[error("tail expansion meets the cut at u = {0}")]
    TailOnCut(Complex64),
    #[error("order must be real and positive, got {0}")]
    BadOrder(Complex64),
    #[error("s = {s} is within {dist:e} of a pole")]
    NearPole { s: Complex64, dist: f64 },
    #[error("tail error {0:e} exceeds tolerance")]
    Tail(f64),
    #[error("weight must act as a scalar on every mode (mode {0})")]
    NonScalarWeight(i64),
    #[error("rank mismatch {0} vs {1}")]
    Rank(usize, usize),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

pub type ModeMap = Arc<dyn Fn(f64) -> CMat + Send + Sync>;

/// Fourier multiplier `σ(D)` with its closed-form mode map, symbol expansion and cut.
#[derive(Clone)]
pub struct MultiplierOperator {
    pub symbol: PolyhomSymbol,
    pub cut: SpectralCut,
    mode_map: ModeMap,
}

impl std::fmt::Debug for MultiplierOperator {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("MultiplierOperator").field("order", &self.symbol.order()).field("cut", &self.cut).finish()
    }
}

impl MultiplierOperator {
    pub fn new(symbol: PolyhomSymbol, cut: SpectralCut) -> Result<Self, OracleError> {
        let mode_map = match symbol.exact() {
            Some(ExactEvaluator::Multiplier(f)) if symbol.is_multiplier() => f.clone(),
            _ => return Err(OracleError::NoModeMap),
        };
        Ok(MultiplierOperator { symbol, cut, mode_map })
    }

    pub fn order(&self) -> Complex64 {
        self.symbol.order()
    }

    pub fn rank(&self) -> usize {
        self.symbol.as_log().rank()
    }

    pub fn mode(&self, n: i64) -> CMat {
        (self.mode_map)(n as f64)
    }

    /// Mode-wise product `σ_A(n) σ_B(n)`.
    pub fn product(&self, other: &Self, cut: SpectralCut) -> Result<Self, OracleError> {
        let depth = self.symbol.depth().min(other.symbol.depth());
        let s = star_classical(&self.symbol, &other.symbol, depth)?;
        MultiplierOperator::new(s, cut)
    }

    /// Largest `‖σ(n) − Σ_j σ_{a−j}(sgn n)|n|^{a−j}‖ / |n|^{a−N}` over `from ≤ |n| ≤ 4 from`.
    pub fn expansion_defect(&self, from: i64) -> f64 {
        let a = self.order().re;
        let depth = self.symbol.depth() as f64;
        let mut worst: f64 = 0.0;
        for n in from..=4 * from {
            for sign in [1i64, -1] {
                let xi = (sign * n) as f64;
                let exact = self.mode(sign * n);
                let approx = self.symbol.as_log().expansion_sample(0, xi);
                worst = worst.max(frob(&(exact - approx)) / (n as f64).powf(a - depth));
            }
        }
        worst
    }

    /// Rejects eigenvalues on the cut for `|n| ≤ modes`.
    pub fn check_admissible(&self, modes: usize) -> Result<(), OracleError> {
        for n in -(modes as i64)..=(modes as i64) {
            for e in eigenvalues(&self.mode(n)) {
                if distance_to_ray(e, self.cut.theta) <= CUT_CLEARANCE * (1.0 + e.norm()) {
                    return Err(OracleError::OnCut { mode: n, eig: e, theta: self.cut.theta });
                }
            }
        }
        Ok(())
    }

    fn real_order(&self) -> Result<f64, OracleError> {
        let a = self.order();
        if a.im.abs() > 1e-14 || a.re <= 0.0 {
            return Err(OracleError::BadOrder(a));
        }
        Ok(a.re)
    }

    /// `Σ_{j<depth} σ_{a−j}(±1) u^j`.
    fn expansion_poly(&self, positive: bool, u: Complex64) -> CMat {
        let depth = self.symbol.depth();
        let m = self.rank();
        let mut acc = CMat::zeros(m, m);
        let mut p = Complex64::new(1.0, 0.0);
        for j in 0..depth {
            acc += self.symbol.comp(j).side(positive).sample(0) * p;
            p *= u;
        }
        acc
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OracleConfig {
    pub modes: usize,
    pub terms: usize,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig { modes: DEFAULT_MODES, terms: DEFAULT_TERMS }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct ZetaResult {
    pub value: Complex64,
    /// Size of the last two tail terms kept.
    pub error_estimate: f64,
    pub direct: Complex64,
    pub tail: Complex64,
}

fn pairwise_sum(v: &[Complex64]) -> Complex64 {
    if v.len() <= 8 {
        v.iter().sum()
    } else {
        let (l, r) = v.split_at(v.len() / 2);
        pairwise_sum(l) + pairwise_sum(r)
    }
}

fn cauchy_nodes() -> Vec<Complex64> {
    (0..CAUCHY_POINTS)
        .map(|p| Complex64::from_polar(CAUCHY_RADIUS, 2.0 * PI * p as f64 / CAUCHY_POINTS as f64))
        .collect()
}

/// Taylor coefficients `c_0..c_{k−1}` of `f` from its values on the Cauchy circle.
fn taylor_coefficients(values: &[Complex64], k: usize) -> Vec<Complex64> {
    let n = values.len() as f64;
    (0..k)
        .map(|j| {
            let s: Complex64 = values
                .iter()
                .enumerate()
                .map(|(p, v)| v * Complex64::from_polar(1.0, -2.0 * PI * (j * p) as f64 / n))
                .sum();
            s / (n * CAUCHY_RADIUS.powi(j as i32))
        })
        .collect()
}

/// Eigenvalues of the direct modes and of the tail expansion on the Cauchy circle.
struct Spectrum {
    order: f64,
    theta: f64,
    modes: Vec<Vec<Complex64>>,
    /// `tail[side][p]`: eigenvalues of the expansion polynomial at the `p`-th Cauchy node.
    tail: [Vec<Vec<Complex64>>; 2],
    split: f64,
    terms: usize,
}

impl Spectrum {
    fn new(op: &MultiplierOperator, cfg: &OracleConfig) -> Result<Self, OracleError> {
        let order = op.real_order()?;
        let theta = op.cut.theta;
        let m = cfg.modes as i64;
        let mut modes = Vec::with_capacity(2 * cfg.modes + 1);
        for n in -m..=m {
            let e = eigenvalues(&op.mode(n));
            for &z in &e {
                if distance_to_ray(z, theta) <= CUT_CLEARANCE * (1.0 + z.norm()) {
                    return Err(OracleError::OnCut { mode: n, eig: z, theta });
                }
            }
            modes.push(e);
        }
        let nodes = cauchy_nodes();
        let mut tail: [Vec<Vec<Complex64>>; 2] = [Vec::new(), Vec::new()];
        for (side, positive) in [true, false].into_iter().enumerate() {
            for &u in &nodes {
                let e = eigenvalues(&op.expansion_poly(positive, u));
                if e.iter().any(|z| distance_to_ray(*z, theta) <= 1e-3 * (1.0 + z.norm())) {
                    return Err(OracleError::TailOnCut(u));
                }
                tail[side].push(e);
            }
        }
        let terms = cfg.terms.min(op.symbol.depth());
        Ok(Spectrum { order, theta, modes, tail, split: cfg.modes as f64, terms })
    }

    fn tail_coefficients(&self, side: usize, s: Complex64) -> Vec<Complex64> {
        let vals: Vec<Complex64> =
            self.tail[side].iter().map(|e| e.iter().map(|z| pow_branch(*z, -s, self.theta)).sum()).collect();
        taylor_coefficients(&vals, self.terms)
    }

    fn zeta(&self, s: Complex64) -> Result<ZetaResult, OracleError> {
        let a = self.order;
        for k in 0..self.terms {
            let pole = (1.0 - k as f64) / a;
            let dist = (s - pole).norm();
            if pole != 0.0 && dist < POLE_GUARD {
                let mut residue: f64 = 0.0;
                for side in 0..2 {
                    residue = residue.max(self.tail_coefficients(side, Complex64::new(pole, 0.0))[k].norm());
                }
                if residue > 1e-10 {
                    return Err(OracleError::NearPole { s, dist });
                }
            }
        }
        let direct_terms: Vec<Complex64> =
            self.modes.iter().map(|e| e.iter().map(|z| pow_branch(*z, -s, self.theta)).sum()).collect();
        let direct = pairwise_sum(&direct_terms);
        let mut tail = Complex64::new(0.0, 0.0);
        let mut last = 0.0;
        for side in 0..2 {
            let coeffs = self.tail_coefficients(side, s);
            for (k, ck) in coeffs.iter().enumerate() {
                let t = ck * hurwitz_zeta(a * s + k as f64, self.split + 1.0);
                tail += t;
                if k + 2 >= coeffs.len() {
                    last += t.norm();
                }
            }
        }
        Ok(ZetaResult { value: direct + tail, error_estimate: last, direct, tail })
    }

    fn symmetric(&self, h: f64) -> Result<(Complex64, Complex64), OracleError> {
        let p = self.zeta(Complex64::new(h, 0.0))?.value;
        let m = self.zeta(Complex64::new(-h, 0.0))?.value;
        Ok(((p + m) * 0.5, (p - m) / (2.0 * h)))
    }

    /// `(ζ(0), ζ′(0))` by Richardson-extrapolated centered differences.
    fn at_zero(&self) -> Result<(Complex64, Complex64), OracleError> {
        let (v1, d1) = self.symmetric(S_STEP)?;
        let (v2, d2) = self.symmetric(S_STEP / 2.0)?;
        Ok(((4.0 * v2 - v1) / 3.0, (4.0 * d2 - d1) / 3.0))
    }
}

/// `ζ_A(s) = Σ_n tr σ(n)_θ^{−s}`, continued by the subtracted tail.
pub fn zeta(a: &MultiplierOperator, s: Complex64, cfg: &OracleConfig) -> Result<ZetaResult, OracleError> {
    Spectrum::new(a, cfg)?.zeta(s)
}

pub fn zeta_at_zero(a: &MultiplierOperator, cfg: &OracleConfig) -> Result<Complex64, OracleError> {
    Ok(Spectrum::new(a, cfg)?.at_zero()?.0)
}

pub fn zeta_prime_zero(a: &MultiplierOperator, cfg: &OracleConfig) -> Result<Complex64, OracleError> {
    Ok(Spectrum::new(a, cfg)?.at_zero()?.1)
}

/// `log det_ζ(A) = −ζ′_A(0)`.
pub fn log_det_zeta_spectral(a: &MultiplierOperator, cfg: &OracleConfig) -> Result<Complex64, OracleError> {
    Ok(-zeta_prime_zero(a, cfg)?)
}

pub fn det_zeta_spectral(a: &MultiplierOperator, cfg: &OracleConfig) -> Result<Complex64, OracleError> {
    Ok(log_det_zeta_spectral(a, cfg)?.exp())
}

/// `log det_ζ(AB) − log det_ζ(A) − log det_ζ(B)` with `AB` formed mode by mode.
pub fn anomaly_spectral(
    a: &MultiplierOperator,
    b: &MultiplierOperator,
    psi: SpectralCut,
    cfg: &OracleConfig,
) -> Result<Complex64, OracleError> {
    if a.rank() != b.rank() {
        return Err(OracleError::Rank(a.rank(), b.rank()));
    }
    let ab = a.product(b, psi)?;
    Ok(log_det_zeta_spectral(&ab, cfg)? - log_det_zeta_spectral(a, cfg)? - log_det_zeta_spectral(b, cfg)?)
}

/// Scalar value of the weight on mode `n`.
fn scalar_weight(q: &MultiplierOperator, m: &CMat, n: i64) -> Result<Complex64, OracleError> {
    let v = m[(0, 0)];
    let off = frob(&(m - CMat::identity(m.nrows(), m.ncols()) * v));
    if off > 1e-12 * (1.0 + v.norm()) {
        return Err(OracleError::NonScalarWeight(n));
    }
    if distance_to_ray(v, q.cut.theta) <= CUT_CLEARANCE * (1.0 + v.norm()) {
        return Err(OracleError::OnCut { mode: n, eig: v, theta: q.cut.theta });
    }
    Ok(v)
}

/// `fp_{z=0} Σ_n tr(σ_A(n) σ_Q(n)^{−z})` for a weight acting as a scalar on each mode.
pub fn weighted_trace_spectral(a: &MultiplierOperator, q: &MultiplierOperator, cfg: &OracleConfig) -> Result<Complex64, OracleError> {
    let qo = q.real_order()?;
    let alpha = a.order();
    let theta = q.cut.theta;
    let m = cfg.modes as i64;
    let mut traces = Vec::with_capacity(2 * cfg.modes + 1);
    let mut logs = Vec::with_capacity(2 * cfg.modes + 1);
    for n in -m..=m {
        traces.push(a.mode(n).trace());
        logs.push(log_branch(scalar_weight(q, &q.mode(n), n)?, theta));
    }
    let extra = (alpha.re + 1.0).ceil().max(0.0) as usize;
    let terms = (cfg.terms + extra).min(a.symbol.depth()).min(q.symbol.depth());
    let nodes = cauchy_nodes();
    let mut side_data = Vec::new();
    for positive in [true, false] {
        let mut tr = Vec::new();
        let mut lq = Vec::new();
        for &u in &nodes {
            tr.push(a.expansion_poly(positive, u).trace());
            let qv = q.expansion_poly(positive, u)[(0, 0)];
            if distance_to_ray(qv, theta) <= 1e-3 * (1.0 + qv.norm()) {
                return Err(OracleError::TailOnCut(u));
            }
            lq.push(log_branch(qv, theta));
        }
        side_data.push((tr, lq));
    }
    let f = |z: f64| -> Complex64 {
        let z = Complex64::new(z, 0.0);
        let direct: Vec<Complex64> = traces.iter().zip(&logs).map(|(t, l)| t * (-z * l).exp()).collect();
        let mut total = pairwise_sum(&direct);
        for (tr, lq) in &side_data {
            let vals: Vec<Complex64> = tr.iter().zip(lq).map(|(t, l)| t * (-z * l).exp()).collect();
            for (k, ck) in taylor_coefficients(&vals, terms).iter().enumerate() {
                total += ck * hurwitz_zeta(qo * z - alpha + k as f64, cfg.modes as f64 + 1.0);
            }
        }
        total
    };
    let sym = |h: f64| (f(h) + f(-h)) * 0.5;
    Ok((4.0 * sym(Z_STEP / 2.0) - sym(Z_STEP)) / 3.0)
}
