//! Operator and problem configuration in JSON.

use num_complex::Complex64;
use psido_core::anomaly::{auto_cut, AnomalyConfig, CutOperator};
use psido_core::holo::SpectralCut;
use psido_core::grid::grid_point;
use psido_core::linalg::{pow_branch, CMat};
use psido_core::operators::{dirac_shift, matrix_multiplier, perturbed_matrix_multiplier, x_dependent_symbol, BuildError};
use psido_core::series::AsymSeries;
use psido_core::symbol::{ExactEvaluator, PolyhomSymbol};
use psido_core::trace::TraceOptions;
use psido_oracle::{MultiplierOperator, OracleConfig};
use serde::{Deserialize, Serialize};

use crate::expr::{parse, BinOp, Env, Expr, ParseError, Var};

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("{0}")]
    Json(#[from] serde_json::Error),
    #[error("field `{path}`: {source}")]
    Expr { path: String, source: ParseError },
    #[error("field `{path}`: {message}")]
    Invalid { path: String, message: String },
    #[error("operator is not admissible: {0}")]
    Admissibility(String),
    #[error(transparent)]
    Build(#[from] BuildError),
}

fn invalid(path: &str, message: impl Into<String>) -> ConfigError {
    ConfigError::Invalid { path: path.to_string(), message: message.into() }
}

/// A number given either literally or as a constant expression.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum Num {
    Value(f64),
    Text(String),
}

impl Num {
    pub fn resolve(&self, path: &str) -> Result<Complex64, ConfigError> {
        match self {
            Num::Value(v) => Ok(Complex64::new(*v, 0.0)),
            Num::Text(s) => {
                let e = parse(s).map_err(|source| ConfigError::Expr { path: path.to_string(), source })?;
                if !e.is_constant() {
                    return Err(invalid(path, "expected a constant"));
                }
                Ok(e.eval(&Env::default()))
            }
        }
    }

    pub fn real(&self, path: &str) -> Result<f64, ConfigError> {
        let v = self.resolve(path)?;
        if v.im != 0.0 {
            return Err(invalid(path, "expected a real number"));
        }
        Ok(v.re)
    }

    fn canonical(&self) -> Result<Num, ParseError> {
        match self {
            Num::Value(v) => Ok(Num::Value(*v)),
            Num::Text(s) => Ok(Num::Text(parse(s)?.to_string())),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum OperatorKind {
    /// `base(D)^exponent` for a polynomial `base` in `n`.
    PowerMultiplier { base: String, exponent: Num },
    /// `D + c`.
    ShiftedFirstOrder { c: Num },
    /// `(1 − Δ)^{order/2} (lead + eps (1 − Δ)^{−1/2} pert)`.
    MatrixMultiplier {
        order: Num,
        lead: Vec<Vec<Num>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        pert: Option<Vec<Vec<Num>>>,
        #[serde(default, skip_serializing_if = "Option::is_none")]
        eps: Option<Num>,
    },
    /// Scalar `Σ_j σ_{order−j}(x, ±1)|ξ|^{order−j}`, components given as `[plus, minus]` in `x`.
    VariableSymbol { order: Num, components: Vec<[String; 2]> },
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct OperatorSpec {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(flatten)]
    pub kind: OperatorKind,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cut: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub depth: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub grid: Option<usize>,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Settings {
    pub depth: usize,
    pub grid: usize,
    pub modes: usize,
    pub lambda: usize,
    pub tau_nodes: usize,
    pub tol: f64,
}

impl Default for Settings {
    fn default() -> Self {
        Settings { depth: 8, grid: 64, modes: 4096, lambda: 1000, tau_nodes: 16, tol: 1e-3 }
    }
}

impl Settings {
    pub fn trace(&self) -> TraceOptions {
        TraceOptions::default().with_lambda(self.lambda)
    }

    pub fn anomaly(&self) -> AnomalyConfig {
        AnomalyConfig { depth: self.depth, tau_nodes: self.tau_nodes, trace: self.trace(), ..AnomalyConfig::default() }
    }

    pub fn oracle(&self) -> OracleConfig {
        OracleConfig { modes: self.modes, ..OracleConfig::default() }
    }
}

/// Operators `A`, optional `B` and weight `Q`, and numerical settings.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ProblemConfig {
    pub a: OperatorSpec,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub b: Option<OperatorSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub weight: Option<OperatorSpec>,
    #[serde(default)]
    pub settings: Settings,
}

pub fn parse_operator(text: &str) -> Result<OperatorSpec, ConfigError> {
    let spec: OperatorSpec = serde_json::from_str(text)?;
    spec.validate()?;
    Ok(spec)
}

pub fn parse_problem(text: &str) -> Result<ProblemConfig, ConfigError> {
    let p: ProblemConfig = serde_json::from_str(text)?;
    p.a.validate()?;
    for s in p.b.iter().chain(p.weight.iter()) {
        s.validate()?;
    }
    Ok(p)
}

fn parse_at(path: &str, s: &str) -> Result<Expr, ConfigError> {
    parse(s).map_err(|source| ConfigError::Expr { path: path.to_string(), source })
}

/// Operator built from a spec, with the exact mode map kept for multipliers.
#[derive(Clone, Debug)]
pub struct BuiltOperator {
    pub name: String,
    pub op: CutOperator,
}

impl BuiltOperator {
    pub fn symbol(&self) -> &PolyhomSymbol {
        &self.op.symbol
    }

    pub fn multiplier(&self) -> Option<MultiplierOperator> {
        MultiplierOperator::new(self.op.symbol.clone(), self.op.cut).ok()
    }
}

impl OperatorSpec {
    pub fn validate(&self) -> Result<(), ConfigError> {
        match &self.kind {
            OperatorKind::PowerMultiplier { base, exponent } => {
                let e = parse_at("base", base)?;
                if e.uses(Var::X) {
                    return Err(invalid("base", "multipliers may not depend on x"));
                }
                if e.polynomial(Var::N).is_none() {
                    return Err(invalid("base", "expected a polynomial in n"));
                }
                exponent.real("exponent")?;
            }
            OperatorKind::ShiftedFirstOrder { c } => {
                c.resolve("c")?;
            }
            OperatorKind::MatrixMultiplier { order, lead, pert, eps } => {
                order.real("order")?;
                let m = lead.len();
                let check = |rows: &Vec<Vec<Num>>, name: &str| -> Result<(), ConfigError> {
                    if rows.len() != m || rows.iter().any(|r| r.len() != m) || m == 0 {
                        return Err(invalid(name, "expected a nonempty square matrix matching `lead`"));
                    }
                    for (i, r) in rows.iter().enumerate() {
                        for (j, v) in r.iter().enumerate() {
                            v.resolve(&format!("{name}[{i}][{j}]"))?;
                        }
                    }
                    Ok(())
                };
                check(lead, "lead")?;
                if let Some(p) = pert {
                    check(p, "pert")?;
                }
                if let Some(e) = eps {
                    e.real("eps")?;
                }
            }
            OperatorKind::VariableSymbol { order, components } => {
                order.real("order")?;
                if components.is_empty() {
                    return Err(invalid("components", "at least one component is required"));
                }
                for (j, pair) in components.iter().enumerate() {
                    for (s, text) in pair.iter().enumerate() {
                        let path = format!("components[{j}][{s}]");
                        let e = parse_at(&path, text)?;
                        if e.uses(Var::N) || e.uses(Var::Xi) {
                            return Err(invalid(&path, "components depend on x only"));
                        }
                    }
                }
            }
        }
        Ok(())
    }

    /// Same spec with every expression re-emitted in canonical form.
    pub fn canonical(&self) -> Result<OperatorSpec, ConfigError> {
        let ce = |path: &str, s: &String| parse_at(path, s).map(|e| e.to_string());
        let cn = |path: &str, n: &Num| n.canonical().map_err(|source| ConfigError::Expr { path: path.to_string(), source });
        let cm = |path: &str, rows: &Vec<Vec<Num>>| -> Result<Vec<Vec<Num>>, ConfigError> {
            rows.iter().map(|r| r.iter().map(|v| cn(path, v)).collect()).collect()
        };
        let kind = match &self.kind {
            OperatorKind::PowerMultiplier { base, exponent } => {
                OperatorKind::PowerMultiplier { base: ce("base", base)?, exponent: cn("exponent", exponent)? }
            }
            OperatorKind::ShiftedFirstOrder { c } => OperatorKind::ShiftedFirstOrder { c: cn("c", c)? },
            OperatorKind::MatrixMultiplier { order, lead, pert, eps } => OperatorKind::MatrixMultiplier {
                order: cn("order", order)?,
                lead: cm("lead", lead)?,
                pert: pert.as_ref().map(|p| cm("pert", p)).transpose()?,
                eps: eps.as_ref().map(|e| cn("eps", e)).transpose()?,
            },
            OperatorKind::VariableSymbol { order, components } => OperatorKind::VariableSymbol {
                order: cn("order", order)?,
                components: components
                    .iter()
                    .map(|[p, m]| Ok([ce("components", p)?, ce("components", m)?]))
                    .collect::<Result<_, ConfigError>>()?,
            },
        };
        Ok(OperatorSpec { kind, ..self.clone() })
    }

    pub fn build(&self, settings: &Settings) -> Result<BuiltOperator, ConfigError> {
        self.validate()?;
        let depth = self.depth.unwrap_or(settings.depth);
        let grid = self.grid.unwrap_or(settings.grid);
        let symbol = match &self.kind {
            OperatorKind::PowerMultiplier { base, exponent } => {
                let coeffs = parse_at("base", base)?.polynomial(Var::N).expect("validated polynomial");
                let p = Complex64::new(exponent.real("exponent")?, 0.0);
                match self.cut {
                    Some(theta) => power_multiplier(&coeffs, p, theta, depth, grid)?,
                    None => {
                        // The branch of P^p follows the cut chosen for P itself.
                        let one = Complex64::new(1.0, 0.0);
                        let base = power_multiplier(&coeffs, one, std::f64::consts::PI, depth, grid)?;
                        let theta = auto_cut(&base, 512).map_err(|e| ConfigError::Admissibility(e.to_string()))?.theta;
                        power_multiplier(&coeffs, p, theta, depth, grid)?
                    }
                }
            }
            OperatorKind::ShiftedFirstOrder { c } => dirac_shift(c.resolve("c")?, depth, grid)?,
            OperatorKind::MatrixMultiplier { order, lead, pert, eps } => {
                let lead = matrix(lead, "lead")?;
                let pert = match pert {
                    Some(p) => matrix(p, "pert")?,
                    None => CMat::zeros(lead.nrows(), lead.ncols()),
                };
                let eps = eps.as_ref().map(|e| e.real("eps")).transpose()?.unwrap_or(0.0);
                perturbed_matrix_multiplier(order.real("order")?, &lead, &pert, eps, depth, grid)?
            }
            OperatorKind::VariableSymbol { order, components } => {
                let mut comps: Vec<(Box<dyn Fn(f64) -> CMat>, Box<dyn Fn(f64) -> CMat>)> = Vec::new();
                for j in 0..depth {
                    let side = |s: usize| -> Result<Box<dyn Fn(f64) -> CMat>, ConfigError> {
                        match components.get(j) {
                            Some(pair) => {
                                let e = parse_at(&format!("components[{j}][{s}]"), &pair[s])?;
                                Ok(Box::new(move |x| CMat::from_element(1, 1, e.eval(&Env { x, ..Env::default() }))))
                            }
                            None => Ok(Box::new(|_| CMat::zeros(1, 1))),
                        }
                    };
                    comps.push((side(0)?, side(1)?));
                }
                let order = order.resolve("order")?;
                let sym = x_dependent_symbol(order, &comps, grid)?;
                // The operator is its finite expansion; the zero mode is annihilated.
                let mut samples: Vec<[Vec<Complex64>; 2]> = Vec::new();
                for (j, pair) in components.iter().enumerate().take(depth) {
                    let side = |s: usize| -> Result<Vec<Complex64>, ConfigError> {
                        let e = parse_at(&format!("components[{j}][{s}]"), &pair[s])?;
                        Ok((0..grid).map(|k| e.eval(&Env { x: grid_point(k, grid), ..Env::default() })).collect())
                    };
                    samples.push([side(0)?, side(1)?]);
                }
                let exact = ExactEvaluator::grid(move |xi| {
                    let side = if xi > 0.0 { 0 } else { 1 };
                    (0..grid)
                        .map(|k| {
                            let v = if xi == 0.0 {
                                Complex64::new(0.0, 0.0)
                            } else {
                                samples
                                    .iter()
                                    .enumerate()
                                    .map(|(j, c)| c[side][k] * Complex64::new(xi.abs(), 0.0).powc(order - j as f64))
                                    .sum()
                            };
                            CMat::from_element(1, 1, v)
                        })
                        .collect()
                });
                sym.with_exact(Some(exact))
            }
        };
        let cut = match self.cut {
            Some(t) => SpectralCut::new(t),
            None => auto_cut(&symbol, 512).map_err(|e| ConfigError::Admissibility(e.to_string()))?,
        };
        cut.check_symbol(&symbol).map_err(|e| ConfigError::Admissibility(e.to_string()))?;
        if symbol.is_multiplier() {
            cut.check_modes(symbol.as_log(), 512).map_err(|e| ConfigError::Admissibility(e.to_string()))?;
        }
        let name = self.name.clone().unwrap_or_else(|| "operator".to_string());
        Ok(BuiltOperator { name, op: CutOperator::new(symbol, cut) })
    }
}

/// Spec for an operator written as `P(n)` or `P(n)^p` with `P` a polynomial.
pub fn spec_from_expression(src: &str) -> Result<OperatorSpec, ConfigError> {
    let e = parse_at("op", src)?;
    let (base, exponent) = match &e {
        Expr::Bin(BinOp::Pow, b, p) if p.is_constant() && !b.is_constant() => {
            let v = p.eval(&Env::default());
            if v.im != 0.0 {
                return Err(invalid("op", "exponent must be real"));
            }
            ((**b).clone(), v.re)
        }
        _ => (e.clone(), 1.0),
    };
    if base.polynomial(Var::N).is_none() {
        return Err(invalid("op", "expected P(n) or P(n)^p with P a polynomial in n"));
    }
    let spec = OperatorSpec {
        name: Some(src.to_string()),
        kind: OperatorKind::PowerMultiplier { base: base.to_string(), exponent: Num::Value(exponent) },
        cut: None,
        depth: None,
        grid: None,
    };
    spec.validate()?;
    Ok(spec)
}

fn matrix(rows: &[Vec<Num>], name: &str) -> Result<CMat, ConfigError> {
    let m = rows.len();
    let mut out = CMat::zeros(m, m);
    for (i, r) in rows.iter().enumerate() {
        for (j, v) in r.iter().enumerate() {
            out[(i, j)] = v.resolve(&format!("{name}[{i}][{j}]"))?;
        }
    }
    Ok(out)
}

/// `P(ξ)^p` for a polynomial `P` with coefficients `coeffs`, as a scalar multiplier.
fn power_multiplier(coeffs: &[Complex64], p: Complex64, theta: f64, depth: usize, grid: usize) -> Result<PolyhomSymbol, ConfigError> {
    let deg = coeffs.len() - 1;
    if deg == 0 {
        return Err(invalid("base", "polynomial must depend on n"));
    }
    let len = depth + deg;
    let side = |sign: f64| -> Result<AsymSeries, BuildError> {
        let t = AsymSeries::variable(Complex64::new(sign, 0.0), len);
        let mut acc = AsymSeries::constant(coeffs[deg], len);
        for k in (0..deg).rev() {
            acc = acc.mul(&t).add(&AsymSeries::constant(coeffs[k], len))?;
        }
        Ok(acc.pow(p, theta)?)
    };
    let (plus, minus) = (side(1.0)?, side(-1.0)?);
    let cs = coeffs.to_vec();
    let exact = ExactEvaluator::multiplier(move |xi| {
        let v = cs.iter().rev().fold(Complex64::new(0.0, 0.0), |acc, c| acc * xi + c);
        CMat::from_element(1, 1, pow_branch(v, p, theta))
    });
    Ok(matrix_multiplier(&[vec![plus]], &[vec![minus]], depth, grid, Some(exact))?)
}
