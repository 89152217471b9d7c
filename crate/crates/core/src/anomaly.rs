//! `L(A,B)`, `K(A,B)`, `W(τ)`, weighted and ζ-determinants and their multiplicative anomalies.
//!
//! With `L(A,B) = log(AB) − log A − log B` and
//! `K(A,B) = log²(AB)/(2(a+b)) − log²A/(2a) − log²B/(2b)`:
//!
//! * `tr^Q(L) = ∫_0^1 res(W(τ)(log(A^τB)/(aτ+b) − log Q/q)) dτ`, `W(τ) = d/dt|₀ L(A^t, A^τB)`;
//! * `log det_ζ(A) = ∫ [TR_x(log A) − res_x(log²A)/(2a)] dx`;
//! * `log M_ζ(A,B) = tr^B(L) + res(L log B/b − K)`, and symmetrically with `A`.

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::holo::{complex_power_symbol, log_symbol, HoloError, SpectralCut};
use crate::linalg::{eigenvalues, frob};
use crate::quad::gauss_legendre;
use crate::star::{commutator_symbol, star_classical, star_product};
use crate::symbol::{ExactEvaluator, LogPolyhomSymbol, PolyhomSymbol, SymbolError};
use crate::trace::{
    residue, residue_density, cutoff_trace_density, weighted_trace_with_log, DensityReport, TraceError, TraceOptions,
    WeightedTraceReport,
};

/// Cancellation required of log coefficients that must vanish.
pub const LOG_CANCEL_TOL: f64 = 1e-8;
/// Step of the centered `t`-difference defining `W(τ)`.
pub const W_STEP: f64 = 1e-3;
pub const TAU_NODES: usize = 16;
/// Allowed change of the τ-integral when the node count doubles.
pub const TAU_TOL: f64 = 1e-6;
/// Smallest angular gap accepted by the automatic cut selection.
pub const MIN_CUT_GAP: f64 = 2.0 * PI / 180.0;
pub const CUT_MODES: i64 = 512;
pub const SWAP_TOL: f64 = 1e-6;
pub const DEFECT_PATH_TOL: f64 = 1e-5;
/// Components of order-0 factors that reach the residue of their product.
const RESIDUE_DEPTH: usize = 2;
/// Modes on which multiplier pairs are tested for commutation.
const COMMUTE_MODES: i64 = 64;

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum AnomalyError {
    #[error("log coefficients fail to cancel ({0:e}); cuts are inconsistent")]
    LogCancellation(f64),
    #[error("no admissible cut: largest spectral gap {0} rad")]
    NoCut(f64),
    #[error("operator is not invertible: eigenvalue {0} at mode {1}")]
    Singular(Complex64, i64),
    #[error("τ-quadrature did not converge ({0:e})")]
    Quadrature(f64),
    #[error("{what}: {lhs} vs {rhs}")]
    Mismatch { what: &'static str, lhs: Complex64, rhs: Complex64 },
    #[error(transparent)]
    Trace(#[from] TraceError),
    #[error(transparent)]
    Holo(#[from] HoloError),
    #[error(transparent)]
    Symbol(#[from] SymbolError),
}

/// Admissible operator with its cut.
#[derive(Clone, Debug)]
pub struct CutOperator {
    pub symbol: PolyhomSymbol,
    pub cut: SpectralCut,
}

impl CutOperator {
    pub fn new(symbol: PolyhomSymbol, cut: SpectralCut) -> Self {
        CutOperator { symbol, cut }
    }

    pub fn order(&self) -> f64 {
        self.symbol.order().re
    }

    pub fn log(&self, depth: usize) -> Result<LogPolyhomSymbol, HoloError> {
        log_symbol(&self.symbol, self.cut, depth)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct AnomalyConfig {
    pub depth: usize,
    pub tau_nodes: usize,
    pub cut_modes: i64,
    pub trace: TraceOptions,
}

impl Default for AnomalyConfig {
    fn default() -> Self {
        AnomalyConfig { depth: 8, tau_nodes: TAU_NODES, cut_modes: CUT_MODES, trace: TraceOptions::default() }
    }
}

fn angle(z: Complex64) -> f64 {
    z.arg().rem_euclid(2.0 * PI)
}

/// Eigenvalues of the leading symbol at every `(x_k, ±1)` and of the modes `|n| ≤ modes`.
fn spectrum_sample(sigma: &PolyhomSymbol, modes: i64) -> Result<Vec<Complex64>, AnomalyError> {
    let mut eigs = Vec::new();
    let lead = sigma.comp(0);
    for positive in [true, false] {
        let f = lead.side(positive);
        let n = if f.is_constant_repr() { 1 } else { f.grid_size() };
        for k in 0..n {
            eigs.extend(eigenvalues(f.sample(k)));
        }
    }
    if let Some(ExactEvaluator::Multiplier(f)) = sigma.exact() {
        for n in -modes..=modes {
            for e in eigenvalues(&f(n as f64)) {
                if e.norm() < 1e-14 {
                    return Err(AnomalyError::Singular(e, n));
                }
                eigs.push(e);
            }
        }
    }
    Ok(eigs)
}

/// Cut through the middle of the largest angular gap in the sampled spectrum.
pub fn auto_cut(sigma: &PolyhomSymbol, modes: i64) -> Result<SpectralCut, AnomalyError> {
    let mut angles: Vec<f64> = spectrum_sample(sigma, modes)?.into_iter().map(angle).collect();
    angles.sort_by(|a, b| a.partial_cmp(b).unwrap());
    angles.dedup_by(|a, b| (*a - *b).abs() < 1e-15);
    let n = angles.len();
    let (mut best, mut mid) = (0.0, 0.0);
    for i in 0..n {
        let lo = angles[i];
        let hi = if i + 1 < n { angles[i + 1] } else { angles[0] + 2.0 * PI };
        if hi - lo > best {
            best = hi - lo;
            mid = 0.5 * (lo + hi);
        }
    }
    if best < MIN_CUT_GAP {
        return Err(AnomalyError::NoCut(best));
    }
    Ok(SpectralCut::new(mid.rem_euclid(2.0 * PI)))
}

/// `AB` with the given cut, or one chosen from its spectrum.
pub fn product(a: &CutOperator, b: &CutOperator, psi: Option<SpectralCut>, cfg: &AnomalyConfig) -> Result<CutOperator, AnomalyError> {
    let ab = star_classical(&a.symbol, &b.symbol, cfg.depth)?;
    let cut = match psi {
        Some(c) => c,
        None => auto_cut(&ab, cfg.cut_modes)?,
    };
    cut.check_symbol(&ab)?;
    cut.check_modes(ab.as_log(), cfg.cut_modes)?;
    Ok(CutOperator::new(ab, cut))
}

/// Logarithms shared by the anomaly formulas.
#[derive(Clone, Debug)]
pub struct LogData {
    pub ab: CutOperator,
    pub log_a: LogPolyhomSymbol,
    pub log_b: LogPolyhomSymbol,
    pub log_ab: LogPolyhomSymbol,
}

impl LogData {
    pub fn new(a: &CutOperator, b: &CutOperator, psi: Option<SpectralCut>, cfg: &AnomalyConfig) -> Result<Self, AnomalyError> {
        let ab = product(a, b, psi, cfg)?;
        let d = cfg.depth;
        Ok(LogData { log_a: a.log(d)?, log_b: b.log(d)?, log_ab: ab.log(d)?, ab })
    }
}

/// Reinterpret as classical after checking that log coefficients cancel.
fn classical(s: &LogPolyhomSymbol) -> Result<PolyhomSymbol, AnomalyError> {
    let r = s.log_part_norm();
    if r > LOG_CANCEL_TOL {
        return Err(AnomalyError::LogCancellation(r));
    }
    Ok(s.to_classical(f64::INFINITY)?)
}

fn l_from_logs(d: &LogData) -> Result<PolyhomSymbol, AnomalyError> {
    classical(&d.log_ab.sub(&d.log_a)?.sub(&d.log_b)?)
}

/// `L(A,B) = log(AB) − log A − log B`, classical of order 0.
pub fn l_symbol(a: &CutOperator, b: &CutOperator, psi: Option<SpectralCut>, cfg: &AnomalyConfig) -> Result<PolyhomSymbol, AnomalyError> {
    l_from_logs(&LogData::new(a, b, psi, cfg)?)
}

fn k_from_logs(d: &LogData, a: f64, b: f64, depth: usize) -> Result<LogPolyhomSymbol, AnomalyError> {
    let sq = |l: &LogPolyhomSymbol| star_product(l, l, depth);
    let r = |v: f64| Complex64::new(v, 0.0);
    let k = sq(&d.log_ab)?
        .scale(r(1.0 / (2.0 * (a + b))))
        .sub(&sq(&d.log_a)?.scale(r(1.0 / (2.0 * a))))?
        .sub(&sq(&d.log_b)?.scale(r(1.0 / (2.0 * b))))?;
    let top = k.components().iter().flat_map(|row| row.iter().skip(2)).map(|c| c.max_norm()).fold(0.0, f64::max);
    if top > LOG_CANCEL_TOL {
        return Err(AnomalyError::LogCancellation(top));
    }
    Ok(k)
}

/// `K(A,B) = log²(AB)/(2(a+b)) − log²A/(2a) − log²B/(2b)`; its `log²|ξ|` part cancels.
pub fn k_symbol(a: &CutOperator, b: &CutOperator, psi: Option<SpectralCut>, cfg: &AnomalyConfig) -> Result<LogPolyhomSymbol, AnomalyError> {
    let d = LogData::new(a, b, psi, cfg)?;
    k_from_logs(&d, a.order(), b.order(), cfg.depth)
}

/// `L ⋆ log X / x − K`, classical of order 0.
fn l_log_minus_k(l: &PolyhomSymbol, log_x: &LogPolyhomSymbol, x: f64, k: &LogPolyhomSymbol, depth: usize) -> Result<PolyhomSymbol, AnomalyError> {
    let lx = star_product(l.as_log(), log_x, depth)?.scale(Complex64::new(1.0 / x, 0.0));
    classical(&lx.sub(k)?)
}

/// `log(A^t C)` with `C = A^τ B`.
fn log_of_shifted(a: &CutOperator, c: &PolyhomSymbol, t: f64, psi: SpectralCut, depth: usize) -> Result<LogPolyhomSymbol, AnomalyError> {
    let at = complex_power_symbol(&a.symbol, Complex64::new(t, 0.0), a.cut, depth)?;
    let atc = star_classical(&at, c, depth)?;
    Ok(log_symbol(&atc, psi, depth)?)
}

/// `W(τ)` together with `log(A^τ B)`.
fn w_and_log(a: &CutOperator, b: &CutOperator, tau: f64, psi: SpectralCut, log_a: &LogPolyhomSymbol, depth: usize) -> Result<(PolyhomSymbol, LogPolyhomSymbol), AnomalyError> {
    let a_tau = complex_power_symbol(&a.symbol, Complex64::new(tau, 0.0), a.cut, depth)?;
    let c = star_classical(&a_tau, &b.symbol, depth)?;
    let log_c = log_symbol(&c, psi, depth)?;
    let h = W_STEP;
    let f = |t: f64| log_of_shifted(a, &c, t, psi, depth);
    let r = |v: f64| Complex64::new(v, 0.0);
    let d1 = f(h)?.sub(&f(-h)?)?.scale(r(1.0 / (2.0 * h)));
    let d2 = f(h / 2.0)?.sub(&f(-h / 2.0)?)?.scale(r(1.0 / h));
    let deriv = d2.scale(r(4.0 / 3.0)).sub(&d1.scale(r(1.0 / 3.0)))?;
    // d/dt L(A^t, C) = d/dt log(A^t C) − log A.
    let w = classical(&deriv.sub(log_a)?)?;
    Ok((w, log_c))
}

/// `W(τ)(A,B) = d/dt|₀ L(A^t, A^τ B)` by Richardson-extrapolated centered differences.
pub fn w_tau(a: &CutOperator, b: &CutOperator, tau: f64, psi: Option<SpectralCut>, cfg: &AnomalyConfig) -> Result<PolyhomSymbol, AnomalyError> {
    let psi = match psi {
        Some(p) => p,
        None => product(a, b, None, cfg)?.cut,
    };
    let log_a = a.log(cfg.depth)?;
    Ok(w_and_log(a, b, tau, psi, &log_a, cfg.depth)?.0)
}

/// A weight given by `log Q` and its order.
#[derive(Clone, Debug)]
pub struct Weight {
    pub log_q: LogPolyhomSymbol,
    pub q: f64,
}

impl Weight {
    pub fn of(op: &CutOperator, depth: usize) -> Result<Self, AnomalyError> {
        Ok(Weight { log_q: op.log(depth)?, q: op.order() })
    }

    /// Scalar weights act diagonally on bundles of higher rank.
    pub fn acting_on(self, rank: usize) -> Result<Self, AnomalyError> {
        Ok(Weight { log_q: self.log_q.tensor_identity(rank)?, q: self.q })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PathIntegral {
    pub value: Complex64,
    pub tau_nodes: Vec<f64>,
    pub tau_values: Vec<Complex64>,
    /// Change against the rule with twice the nodes.
    pub refinement_change: f64,
}

/// `∫_0^1 res(W(τ)(log(A^τB)/(aτ+b) − log Q/q)) dτ` for each weight, Gauss–Legendre in `τ`
/// with a doubling check.
pub fn trq_l_path(a: &CutOperator, b: &CutOperator, weights: &[Weight], psi: SpectralCut, cfg: &AnomalyConfig) -> Result<Vec<PathIntegral>, AnomalyError> {
    let depth = RESIDUE_DEPTH.min(cfg.depth);
    let log_a = a.log(depth)?;
    let (aa, bb) = (a.order(), b.order());
    let rule = |n: usize| -> (Vec<f64>, Vec<f64>) {
        let (xs, ws) = gauss_legendre(n);
        (xs.iter().map(|x| 0.5 * (x + 1.0)).collect(), ws.iter().map(|w| 0.5 * w).collect())
    };
    let eval = |taus: &[f64]| -> Result<Vec<Vec<Complex64>>, AnomalyError> {
        taus.par_iter()
            .map(|&tau| {
                let (w, log_c) = w_and_log(a, b, tau, psi, &log_a, depth)?;
                let scaled = log_c.scale(Complex64::new(1.0 / (aa * tau + bb), 0.0));
                weights
                    .iter()
                    .map(|wt| {
                        let diff = scaled.sub(&wt.log_q.scale(Complex64::new(1.0 / wt.q, 0.0)))?;
                        Ok(residue(&star_product(w.as_log(), &diff, depth)?))
                    })
                    .collect()
            })
            .collect()
    };
    let (t1, w1) = rule(cfg.tau_nodes);
    let (t2, w2) = rule(2 * cfg.tau_nodes);
    let v1 = eval(&t1)?;
    let v2 = eval(&t2)?;
    let mut out = Vec::with_capacity(weights.len());
    for i in 0..weights.len() {
        let vals: Vec<Complex64> = v1.iter().map(|v| v[i]).collect();
        let s1: Complex64 = vals.iter().zip(&w1).map(|(v, w)| v * w).sum();
        let s2: Complex64 = v2.iter().zip(&w2).map(|(v, w)| v[i] * w).sum();
        let change = (s1 - s2).norm();
        if change > TAU_TOL {
            return Err(AnomalyError::Quadrature(change));
        }
        out.push(PathIntegral { value: s2, tau_nodes: t1.clone(), tau_values: vals, refinement_change: change });
    }
    Ok(out)
}

/// `tr^Q(L(A,B))` by the τ-path formula.
pub fn trq_l(a: &CutOperator, b: &CutOperator, q: &CutOperator, psi: Option<SpectralCut>, cfg: &AnomalyConfig) -> Result<PathIntegral, AnomalyError> {
    let psi = match psi {
        Some(p) => p,
        None => product(a, b, None, cfg)?.cut,
    };
    let w = Weight::of(q, cfg.depth)?.acting_on(a.symbol.as_log().rank())?;
    Ok(trq_l_path(a, b, &[w], psi, cfg)?.pop().unwrap())
}

/// `log det^Q(A) = tr^Q(log A)`.
pub fn log_det_weighted(a: &CutOperator, q: &CutOperator, cfg: &AnomalyConfig) -> Result<WeightedTraceReport, AnomalyError> {
    let la = a.log(cfg.depth)?;
    let w = Weight::of(q, cfg.depth)?.acting_on(la.rank())?;
    Ok(weighted_trace_with_log(&la, &w.log_q, w.q, &cfg.trace)?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct WeightedAnomaly {
    /// `tr^Q(L(A,B))` from the defect formula.
    pub defect: Complex64,
    /// The same from the τ-path formula.
    pub path: PathIntegral,
}

/// `log M^Q(A,B) = tr^Q(L(A,B))`, computed both ways.
pub fn det_q_anomaly(a: &CutOperator, b: &CutOperator, q: &CutOperator, psi: Option<SpectralCut>, cfg: &AnomalyConfig) -> Result<WeightedAnomaly, AnomalyError> {
    let d = LogData::new(a, b, psi, cfg)?;
    let l = l_from_logs(&d)?;
    let w = Weight::of(q, cfg.depth)?.acting_on(l.as_log().rank())?;
    let defect = weighted_trace_with_log(l.as_log(), &w.log_q, w.q, &cfg.trace)?.value;
    let path = trq_l_path(a, b, &[w], d.ab.cut, cfg)?.pop().unwrap();
    if (defect - path.value).norm() > DEFECT_PATH_TOL {
        return Err(AnomalyError::Mismatch { what: "defect and path formulas for tr^Q(L)", lhs: defect, rhs: path.value });
    }
    Ok(WeightedAnomaly { defect, path })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ZetaDeterminant {
    pub log_det: Complex64,
    /// `∫ TR_x(log A) dx`.
    pub cutoff_part: Complex64,
    /// `res(log²A)`.
    pub residue_log_sq: Complex64,
    pub density: DensityReport,
}

/// `log det_ζ(A) = ∫ [TR_x(log A) − res_x(log²A)/(2a)] dx`.
pub fn log_det_zeta_local(a: &CutOperator, cfg: &AnomalyConfig) -> Result<ZetaDeterminant, AnomalyError> {
    let la = a.log(cfg.depth)?;
    let tr = cutoff_trace_density(&la, &cfg.trace.accepting_obstruction())?;
    if tr.error_estimate > 1e-5 {
        return Err(TraceError::LambdaDrift(tr.error_estimate).into());
    }
    let sq = star_product(&la, &la, cfg.depth)?;
    let rd = residue_density(&sq);
    let s = 1.0 / (2.0 * a.order());
    let values: Vec<Complex64> = tr.values().iter().zip(rd.values()).map(|(t, r)| t - r * s).collect();
    let density = DensityReport::new(&values, tr.error_estimate, tr.breakdown.clone());
    Ok(ZetaDeterminant { log_det: density.integral, cutoff_part: tr.integral, residue_log_sq: rd.integral, density })
}

/// Whether `A` and `B` commute symbolically and, for multipliers, on the low modes.
pub fn commute(a: &PolyhomSymbol, b: &PolyhomSymbol, depth: usize) -> Result<bool, AnomalyError> {
    let c = commutator_symbol(a.as_log(), b.as_log(), depth)?;
    if c.max_component_norm() > 1e-12 {
        return Ok(false);
    }
    if let (Some(ExactEvaluator::Multiplier(f)), Some(ExactEvaluator::Multiplier(g))) = (a.exact(), b.exact()) {
        for n in -COMMUTE_MODES..=COMMUTE_MODES {
            let (x, y) = (f(n as f64), g(n as f64));
            if frob(&(&x * &y - &y * &x)) > 1e-12 * (frob(&x) * frob(&y)).max(1.0) {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

/// Local multiplicative anomaly of ζ-determinants and its parts.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AnomalyReport {
    pub log_m_local: Complex64,
    pub log_m_spectral: Option<Complex64>,
    pub commuting: bool,
    /// `tr^B(L)` by the τ-path formula.
    pub trql_integral: Complex64,
    /// `res(K)`.
    pub k_residue: Complex64,
    /// `res(L log B / b)`.
    pub l_log_residue: Complex64,
    /// Assembly weighted by `A` instead of `B`.
    pub swapped: Complex64,
    /// `ab/(2(a+b)) res[(log A/a − log B/b)²]`, commuting inputs only.
    pub commuting_formula: Option<Complex64>,
    pub tau_nodes: Vec<f64>,
    pub tau_values: Vec<Complex64>,
    pub cut_ab: f64,
    pub discrepancy: Option<f64>,
}

impl AnomalyReport {
    pub fn with_spectral(mut self, v: Complex64) -> Self {
        self.log_m_spectral = Some(v);
        self.discrepancy = Some((self.log_m_local - v).norm());
        self
    }
}

/// `ab/(2(a+b)) res[(log A/a − log B/b)²]`.
fn commuting_formula(d: &LogData, a: f64, b: f64, depth: usize) -> Result<Complex64, AnomalyError> {
    let r = |v: f64| Complex64::new(v, 0.0);
    let diff = d.log_a.scale(r(1.0 / a)).sub(&d.log_b.scale(r(1.0 / b)))?;
    let sq = star_product(&diff, &diff, depth)?;
    Ok(residue(&sq) * (a * b / (2.0 * (a + b))))
}

/// `log M_ζ(A,B)` as a residue: the B-weighted assembly `tr^B(L) + res(L log B/b − K)` checked
/// against the A-weighted one; commuting inputs reduce to `−res(K)`.
pub fn zeta_anomaly_local(a: &CutOperator, b: &CutOperator, psi: Option<SpectralCut>, cfg: &AnomalyConfig) -> Result<AnomalyReport, AnomalyError> {
    let depth = cfg.depth;
    let d = LogData::new(a, b, psi, cfg)?;
    let (aa, bb) = (a.order(), b.order());
    let k = k_from_logs(&d, aa, bb, depth)?;
    let k_residue = residue(&k);
    if commute(&a.symbol, &b.symbol, depth)? {
        let l = l_from_logs(&d)?;
        if l.max_component_norm() > 1e-8 {
            return Err(AnomalyError::LogCancellation(l.max_component_norm()));
        }
        let formula = commuting_formula(&d, aa, bb, depth)?;
        let local = -k_residue;
        if (local - formula).norm() > 1e-8 {
            return Err(AnomalyError::Mismatch { what: "−res(K) and the squared-log residue", lhs: local, rhs: formula });
        }
        return Ok(AnomalyReport {
            log_m_local: local,
            log_m_spectral: None,
            commuting: true,
            trql_integral: Complex64::new(0.0, 0.0),
            k_residue,
            l_log_residue: Complex64::new(0.0, 0.0),
            swapped: local,
            commuting_formula: Some(formula),
            tau_nodes: Vec::new(),
            tau_values: Vec::new(),
            cut_ab: d.ab.cut.theta,
            discrepancy: None,
        });
    }
    let l = l_from_logs(&d)?;
    let weights = [Weight { log_q: d.log_b.clone(), q: bb }, Weight { log_q: d.log_a.clone(), q: aa }];
    let mut paths = trq_l_path(a, b, &weights, d.ab.cut, cfg)?;
    let path_a = paths.pop().unwrap();
    let path_b = paths.pop().unwrap();
    let rb = residue(l_log_minus_k(&l, &d.log_b, bb, &k, depth)?.as_log());
    let ra = residue(l_log_minus_k(&l, &d.log_a, aa, &k, depth)?.as_log());
    let local = path_b.value + rb;
    let swapped = path_a.value + ra;
    if (local - swapped).norm() > SWAP_TOL {
        return Err(AnomalyError::Mismatch { what: "B- and A-weighted assemblies", lhs: local, rhs: swapped });
    }
    Ok(AnomalyReport {
        log_m_local: local,
        log_m_spectral: None,
        commuting: false,
        trql_integral: path_b.value,
        k_residue,
        l_log_residue: rb + k_residue,
        swapped,
        commuting_formula: None,
        tau_nodes: path_b.tau_nodes,
        tau_values: path_b.tau_values,
        cut_ab: d.ab.cut.theta,
        discrepancy: None,
    })
}
