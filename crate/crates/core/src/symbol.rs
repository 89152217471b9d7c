//! Homogeneous components and truncated (log-)polyhomogeneous symbols.

use num_complex::Complex64;
use serde::{Deserialize, Serialize};
use std::fmt;
use std::ops::Deref;
use std::sync::Arc;

use crate::cutoff::Cutoff;
use crate::grid::{GridError, GridRecord, PeriodicMatrixFunction};
use crate::linalg::{frob, CMat};

/// Degrees closer than this are treated as equal.
pub const DEGREE_TOL: f64 = 1e-9;

pub type MultiplierFn = Arc<dyn Fn(f64) -> CMat + Send + Sync>;
pub type GridFn = Arc<dyn Fn(f64) -> Vec<CMat> + Send + Sync>;

/// Full symbol at a frequency `ξ`. Values are meaningful at integer `ξ`, where they are the
/// exact action of the operator on `e^{iξx}`.
#[derive(Clone)]
pub enum ExactEvaluator {
    Multiplier(MultiplierFn),
    /// Returns one matrix per gridpoint.
    Grid(GridFn),
}

impl fmt::Debug for ExactEvaluator {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ExactEvaluator::Multiplier(_) => write!(f, "ExactEvaluator::Multiplier"),
            ExactEvaluator::Grid(_) => write!(f, "ExactEvaluator::Grid"),
        }
    }
}

impl ExactEvaluator {
    pub fn multiplier<F: Fn(f64) -> CMat + Send + Sync + 'static>(f: F) -> Self {
        ExactEvaluator::Multiplier(Arc::new(f))
    }

    pub fn grid<F: Fn(f64) -> Vec<CMat> + Send + Sync + 'static>(f: F) -> Self {
        ExactEvaluator::Grid(Arc::new(f))
    }

    pub fn is_multiplier(&self) -> bool {
        matches!(self, ExactEvaluator::Multiplier(_))
    }

    pub fn values(&self, xi: f64, grid_size: usize) -> PeriodicMatrixFunction {
        match self {
            ExactEvaluator::Multiplier(f) => PeriodicMatrixFunction::constant(grid_size, f(xi)),
            ExactEvaluator::Grid(f) => PeriodicMatrixFunction::from_samples(f(xi)).expect("grid samples"),
        }
    }

    /// Samples on the grid, a single entry for multipliers.
    pub fn raw(&self, xi: f64) -> Vec<CMat> {
        match self {
            ExactEvaluator::Multiplier(f) => vec![f(xi)],
            ExactEvaluator::Grid(f) => f(xi),
        }
    }

    pub fn combine(
        a: &ExactEvaluator,
        b: &ExactEvaluator,
        grid_size: usize,
        op: impl Fn(&CMat, &CMat) -> CMat + Send + Sync + Clone + 'static,
    ) -> ExactEvaluator {
        match (a, b) {
            (ExactEvaluator::Multiplier(f), ExactEvaluator::Multiplier(g)) => {
                let (f, g) = (f.clone(), g.clone());
                ExactEvaluator::multiplier(move |xi| op(&f(xi), &g(xi)))
            }
            _ => {
                let (a, b) = (a.clone(), b.clone());
                ExactEvaluator::grid(move |xi| {
                    let va = a.raw(xi);
                    let vb = b.raw(xi);
                    (0..grid_size)
                        .map(|k| op(&va[k.min(va.len() - 1)], &vb[k.min(vb.len() - 1)]))
                        .collect()
                })
            }
        }
    }

    pub fn map(&self, op: impl Fn(&CMat) -> CMat + Send + Sync + 'static) -> ExactEvaluator {
        match self {
            ExactEvaluator::Multiplier(f) => {
                let f = f.clone();
                ExactEvaluator::multiplier(move |xi| op(&f(xi)))
            }
            ExactEvaluator::Grid(f) => {
                let f = f.clone();
                ExactEvaluator::grid(move |xi| f(xi).iter().map(&op).collect())
            }
        }
    }
}

pub fn abs_pow(xi: f64, d: Complex64) -> Complex64 {
    (d * xi.abs().ln()).exp()
}

/// Positively homogeneous term: `|ξ|^d · plus(x)` for `ξ > 0`, `|ξ|^d · minus(x)` for `ξ < 0`.
#[derive(Clone, Debug, PartialEq)]
pub struct HomogComponent {
    pub degree: Complex64,
    pub plus: PeriodicMatrixFunction,
    pub minus: PeriodicMatrixFunction,
}

impl HomogComponent {
    pub fn new(degree: Complex64, plus: PeriodicMatrixFunction, minus: PeriodicMatrixFunction) -> Self {
        assert_eq!(plus.grid_size(), minus.grid_size(), "grid mismatch between sides");
        assert_eq!(plus.rank(), minus.rank(), "rank mismatch between sides");
        HomogComponent { degree, plus, minus }
    }

    pub fn zero(degree: Complex64, grid_size: usize, rank: usize) -> Self {
        let z = PeriodicMatrixFunction::zero(grid_size, rank);
        HomogComponent { degree, plus: z.clone(), minus: z }
    }

    pub fn side(&self, positive: bool) -> &PeriodicMatrixFunction {
        if positive {
            &self.plus
        } else {
            &self.minus
        }
    }

    pub fn grid_size(&self) -> usize {
        self.plus.grid_size()
    }

    pub fn rank(&self) -> usize {
        self.plus.rank()
    }

    /// Value at gridpoint `k`; undefined at `ξ = 0`.
    pub fn eval_sample(&self, k: usize, xi: f64) -> CMat {
        self.side(xi > 0.0).sample(k) * abs_pow(xi, self.degree)
    }

    pub fn eval_at(&self, x: f64, xi: f64) -> CMat {
        self.side(xi > 0.0).eval_at(x) * abs_pow(xi, self.degree)
    }

    pub fn max_norm(&self) -> f64 {
        self.plus.max_norm().max(self.minus.max_norm())
    }

    pub fn add(&self, o: &Self) -> Self {
        HomogComponent { degree: self.degree, plus: self.plus.add(&o.plus), minus: self.minus.add(&o.minus) }
    }

    pub fn scale(&self, s: Complex64) -> Self {
        HomogComponent { degree: self.degree, plus: self.plus.scale(s), minus: self.minus.scale(s) }
    }

    pub fn with_degree(mut self, d: Complex64) -> Self {
        self.degree = d;
        self
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SymbolError {
    #[error("rank mismatch: {0} vs {1}")]
    RankMismatch(usize, usize),
    #[error("grid mismatch: {0} vs {1}")]
    GridMismatch(usize, usize),
    #[error("requested depth {requested} exceeds available depth; max valid depth is {max_valid}")]
    DepthTooLarge { requested: usize, max_valid: usize },
    #[error("orders {0} and {1} do not differ by an integer")]
    NonIntegerOrderGap(Complex64, Complex64),
    #[error("component {j} (log power {l}) has degree {found}, expected {expected}")]
    DegreeMismatch { j: usize, l: usize, found: Complex64, expected: Complex64 },
    #[error("log components do not cancel: largest is {0:e}")]
    LogResidual(f64),
    #[error("multiplier component {0} varies in x by {1:e}")]
    NotConstant(usize, f64),
    #[error("leading component is singular at gridpoint {gridpoint}, ξ > 0: {positive} (smallest singular value {sv:e})")]
    SingularLeading { gridpoint: usize, positive: bool, sv: f64 },
    #[error("symbol has no components")]
    Empty,
    #[error(transparent)]
    Grid(#[from] GridError),
}

/// Truncated log-polyhomogeneous symbol `Σ_{j<N} Σ_{l≤k} σ_{a−j,l}(x,ξ) log^l|ξ|`.
#[derive(Clone, Debug)]
pub struct LogPolyhomSymbol {
    order: Complex64,
    depth: usize,
    log_type: usize,
    grid_size: usize,
    rank: usize,
    /// `components[j][l]` has degree `order − j`.
    components: Vec<Vec<HomogComponent>>,
    exact: Option<ExactEvaluator>,
    is_multiplier: bool,
    cutoff: Cutoff,
}

impl LogPolyhomSymbol {
    pub fn new(
        order: Complex64,
        components: Vec<Vec<HomogComponent>>,
        exact: Option<ExactEvaluator>,
    ) -> Result<Self, SymbolError> {
        if components.is_empty() || components[0].is_empty() {
            return Err(SymbolError::Empty);
        }
        let log_type = components.iter().map(|c| c.len()).max().unwrap_or(1) - 1;
        let grid_size = components[0][0].grid_size();
        let rank = components[0][0].rank();
        let mut comps = Vec::with_capacity(components.len());
        let mut is_multiplier = true;
        for (j, mut row) in components.into_iter().enumerate() {
            let expected = order - j as f64;
            for (l, c) in row.iter().enumerate() {
                if c.rank() != rank {
                    return Err(SymbolError::RankMismatch(rank, c.rank()));
                }
                if c.grid_size() != grid_size {
                    return Err(SymbolError::GridMismatch(grid_size, c.grid_size()));
                }
                if (c.degree - expected).norm() > DEGREE_TOL {
                    return Err(SymbolError::DegreeMismatch { j, l, found: c.degree, expected });
                }
                if !(c.plus.is_constant_repr() && c.minus.is_constant_repr()) {
                    is_multiplier = false;
                }
            }
            while row.len() < log_type + 1 {
                row.push(HomogComponent::zero(expected, grid_size, rank));
            }
            for c in row.iter_mut() {
                c.degree = expected;
            }
            comps.push(row);
        }
        if let Some(e) = &exact {
            if !e.is_multiplier() {
                is_multiplier = false;
            }
        }
        Ok(LogPolyhomSymbol {
            order,
            depth: comps.len(),
            log_type,
            grid_size,
            rank,
            components: comps,
            exact,
            is_multiplier,
            cutoff: Cutoff::standard(),
        })
    }

    pub fn identity(grid_size: usize, rank: usize, depth: usize) -> Self {
        let zero = Complex64::new(0.0, 0.0);
        let mut comps = vec![vec![HomogComponent::new(
            zero,
            PeriodicMatrixFunction::identity(grid_size, rank),
            PeriodicMatrixFunction::identity(grid_size, rank),
        )]];
        for j in 1..depth {
            comps.push(vec![HomogComponent::zero(Complex64::new(-(j as f64), 0.0), grid_size, rank)]);
        }
        let exact = ExactEvaluator::multiplier(move |_| CMat::identity(rank, rank));
        LogPolyhomSymbol::new(zero, comps, Some(exact)).expect("identity symbol")
    }

    pub fn zero_like(order: Complex64, depth: usize, log_type: usize, grid_size: usize, rank: usize) -> Self {
        let comps = (0..depth)
            .map(|j| {
                (0..=log_type)
                    .map(|_| HomogComponent::zero(order - j as f64, grid_size, rank))
                    .collect()
            })
            .collect();
        LogPolyhomSymbol::new(order, comps, None).expect("zero symbol")
    }

    pub fn order(&self) -> Complex64 {
        self.order
    }
    pub fn depth(&self) -> usize {
        self.depth
    }
    pub fn log_type(&self) -> usize {
        self.log_type
    }
    pub fn grid_size(&self) -> usize {
        self.grid_size
    }
    pub fn rank(&self) -> usize {
        self.rank
    }
    pub fn is_multiplier(&self) -> bool {
        self.is_multiplier
    }
    pub fn exact(&self) -> Option<&ExactEvaluator> {
        self.exact.as_ref()
    }
    pub fn cutoff(&self) -> Cutoff {
        self.cutoff
    }
    pub fn components(&self) -> &[Vec<HomogComponent>] {
        &self.components
    }

    pub fn component(&self, j: usize, l: usize) -> Option<&HomogComponent> {
        self.components.get(j).and_then(|row| row.get(l))
    }

    pub fn with_cutoff(mut self, cutoff: Cutoff) -> Self {
        self.cutoff = cutoff;
        self
    }

    pub fn with_exact(mut self, exact: Option<ExactEvaluator>) -> Self {
        if let Some(e) = &exact {
            if !e.is_multiplier() {
                self.is_multiplier = false;
            }
        }
        self.exact = exact;
        self
    }

    pub fn without_exact(mut self) -> Self {
        self.exact = None;
        self
    }

    /// Keep only the first `depth` components.
    pub fn truncate(&self, depth: usize) -> Result<Self, SymbolError> {
        if depth > self.depth {
            return Err(SymbolError::DepthTooLarge { requested: depth, max_valid: self.depth });
        }
        let mut s = self.clone();
        s.components.truncate(depth);
        s.depth = depth;
        Ok(s)
    }

    /// Index shift `k` with `self.order − other.order = k ∈ Z`.
    pub fn order_gap(&self, other: &Self) -> Result<i64, SymbolError> {
        let d = self.order - other.order;
        let k = d.re.round();
        if (d - Complex64::new(k, 0.0)).norm() > DEGREE_TOL {
            return Err(SymbolError::NonIntegerOrderGap(self.order, other.order));
        }
        Ok(k as i64)
    }

    fn check_compatible(&self, other: &Self) -> Result<(), SymbolError> {
        if self.rank != other.rank {
            return Err(SymbolError::RankMismatch(self.rank, other.rank));
        }
        if self.grid_size != other.grid_size {
            return Err(SymbolError::GridMismatch(self.grid_size, other.grid_size));
        }
        Ok(())
    }

    /// Linear combination `α·self + β·other`; orders must differ by an integer.
    pub fn combine(&self, alpha: Complex64, other: &Self, beta: Complex64) -> Result<Self, SymbolError> {
        self.check_compatible(other)?;
        let k = self.order_gap(other)?;
        let (hi, lo, a_hi, a_lo, shift) =
            if k >= 0 { (self, other, alpha, beta, k as usize) } else { (other, self, beta, alpha, (-k) as usize) };
        let depth = hi.depth.min(lo.depth + shift);
        let log_type = hi.log_type.max(lo.log_type);
        let mut comps = Vec::with_capacity(depth);
        for j in 0..depth {
            let deg = hi.order - j as f64;
            let mut row = Vec::with_capacity(log_type + 1);
            for l in 0..=log_type {
                let mut c = match hi.component(j, l) {
                    Some(c) => c.scale(a_hi),
                    None => HomogComponent::zero(deg, hi.grid_size, hi.rank),
                };
                if j >= shift {
                    if let Some(d) = lo.component(j - shift, l) {
                        c = c.add(&d.scale(a_lo));
                    }
                }
                c.degree = deg;
                row.push(c);
            }
            comps.push(row);
        }
        let exact = match (&self.exact, &other.exact) {
            (Some(e1), Some(e2)) => {
                Some(ExactEvaluator::combine(e1, e2, self.grid_size, move |a, b| a * alpha + b * beta))
            }
            _ => None,
        };
        let mut out = LogPolyhomSymbol::new(hi.order, comps, exact)?;
        out.cutoff = self.cutoff;
        Ok(out)
    }

    pub fn add(&self, other: &Self) -> Result<Self, SymbolError> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(1.0, 0.0))
    }

    pub fn sub(&self, other: &Self) -> Result<Self, SymbolError> {
        self.combine(Complex64::new(1.0, 0.0), other, Complex64::new(-1.0, 0.0))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        let mut out = self.clone();
        for row in out.components.iter_mut() {
            for c in row.iter_mut() {
                *c = c.scale(s);
            }
        }
        out.exact = self.exact.as_ref().map(|e| e.map(move |m| m * s));
        out
    }

    /// `σ ⊗ I_rank` for a scalar symbol.
    pub fn tensor_identity(&self, rank: usize) -> Result<Self, SymbolError> {
        if self.rank == rank {
            return Ok(self.clone());
        }
        if self.rank != 1 {
            return Err(SymbolError::RankMismatch(rank, self.rank));
        }
        let lift = move |m: &CMat| CMat::identity(rank, rank) * m[(0, 0)];
        let mut out = self.clone();
        for row in out.components.iter_mut() {
            for c in row.iter_mut() {
                *c = HomogComponent::new(c.degree, c.plus.map(lift), c.minus.map(lift));
            }
        }
        out.rank = rank;
        out.exact = self.exact.as_ref().map(|e| e.map(lift));
        Ok(out)
    }

    /// Largest component norm over log powers `l ≥ 1`.
    pub fn log_part_norm(&self) -> f64 {
        self.components
            .iter()
            .flat_map(|row| row.iter().skip(1))
            .map(|c| c.max_norm())
            .fold(0.0, f64::max)
    }

    pub fn max_component_norm(&self) -> f64 {
        self.components.iter().flatten().map(|c| c.max_norm()).fold(0.0, f64::max)
    }

    /// Largest componentwise difference over the common depth; orders must match.
    pub fn distance(&self, other: &Self) -> Result<f64, SymbolError> {
        let d = self.sub(other)?;
        let depth = self.depth.min(other.depth);
        Ok(d.components.iter().take(depth).flatten().map(|c| c.max_norm()).fold(0.0, f64::max))
    }

    /// Drop log components after checking they are below `tol`.
    pub fn to_classical(&self, tol: f64) -> Result<PolyhomSymbol, SymbolError> {
        let r = self.log_part_norm();
        if r > tol {
            return Err(SymbolError::LogResidual(r));
        }
        let comps = self.components.iter().map(|row| vec![row[0].clone()]).collect();
        let mut inner = LogPolyhomSymbol::new(self.order, comps, self.exact.clone())?;
        inner.cutoff = self.cutoff;
        Ok(PolyhomSymbol { inner })
    }

    /// `Σ_{j,l} σ_{a−j,l}(x_k, ξ) log^l|ξ|` without cut-off.
    pub fn expansion_sample(&self, k: usize, xi: f64) -> CMat {
        let mut acc = CMat::zeros(self.rank, self.rank);
        let lg = xi.abs().ln();
        for row in &self.components {
            for (l, c) in row.iter().enumerate() {
                acc += c.eval_sample(k, xi) * Complex64::new(lg.powi(l as i32), 0.0);
            }
        }
        acc
    }

    pub fn expansion_at(&self, x: f64, xi: f64) -> CMat {
        let mut acc = CMat::zeros(self.rank, self.rank);
        let lg = xi.abs().ln();
        for row in &self.components {
            for (l, c) in row.iter().enumerate() {
                acc += c.eval_at(x, xi) * Complex64::new(lg.powi(l as i32), 0.0);
            }
        }
        acc
    }

    /// Check that every x-independent component is constant to within `tol`.
    pub fn validate_multiplier(&self, tol: f64) -> Result<(), SymbolError> {
        for (j, row) in self.components.iter().enumerate() {
            for c in row {
                let v = c.plus.variation().max(c.minus.variation());
                if v > tol {
                    return Err(SymbolError::NotConstant(j, v));
                }
            }
        }
        Ok(())
    }

    pub fn to_record(&self) -> SymbolRecord {
        let mut components = Vec::new();
        for (j, row) in self.components.iter().enumerate() {
            for (l, c) in row.iter().enumerate() {
                components.push(ComponentRecord {
                    j,
                    l,
                    degree: [c.degree.re, c.degree.im],
                    plus: c.plus.to_record(),
                    minus: c.minus.to_record(),
                });
            }
        }
        SymbolRecord {
            order: [self.order.re, self.order.im],
            depth: self.depth,
            log_type: self.log_type,
            grid_size: self.grid_size,
            rank: self.rank,
            is_multiplier: self.is_multiplier,
            has_exact: self.exact.is_some(),
            cutoff: self.cutoff,
            components,
        }
    }

    /// Rebuild from a record; an exact evaluator is never serialized.
    pub fn from_record(r: &SymbolRecord) -> Result<Self, SymbolError> {
        let order = Complex64::new(r.order[0], r.order[1]);
        let mut rows: Vec<Vec<HomogComponent>> = vec![Vec::new(); r.depth];
        for c in &r.components {
            let comp = HomogComponent::new(
                Complex64::new(c.degree[0], c.degree[1]),
                PeriodicMatrixFunction::from_record(&c.plus)?,
                PeriodicMatrixFunction::from_record(&c.minus)?,
            );
            let row = &mut rows[c.j];
            while row.len() <= c.l {
                row.push(HomogComponent::zero(order - c.j as f64, r.grid_size, r.rank));
            }
            row[c.l] = comp;
        }
        let mut s = LogPolyhomSymbol::new(order, rows, None)?;
        s.cutoff = r.cutoff;
        Ok(s)
    }
}

/// Truncated classical symbol: a log-polyhomogeneous symbol of log type 0.
#[derive(Clone, Debug)]
pub struct PolyhomSymbol {
    inner: LogPolyhomSymbol,
}

impl Deref for PolyhomSymbol {
    type Target = LogPolyhomSymbol;
    fn deref(&self) -> &LogPolyhomSymbol {
        &self.inner
    }
}

impl From<PolyhomSymbol> for LogPolyhomSymbol {
    fn from(s: PolyhomSymbol) -> Self {
        s.inner
    }
}

impl PolyhomSymbol {
    pub fn new(order: Complex64, components: Vec<HomogComponent>, exact: Option<ExactEvaluator>) -> Result<Self, SymbolError> {
        let rows = components.into_iter().map(|c| vec![c]).collect();
        Ok(PolyhomSymbol { inner: LogPolyhomSymbol::new(order, rows, exact)? })
    }

    /// x-independent symbol from component values at `ξ = ±1`.
    pub fn multiplier(
        order: Complex64,
        plus: &[CMat],
        minus: &[CMat],
        grid_size: usize,
        exact: Option<MultiplierFn>,
    ) -> Result<Self, SymbolError> {
        assert_eq!(plus.len(), minus.len());
        let comps = plus
            .iter()
            .zip(minus)
            .enumerate()
            .map(|(j, (p, m))| {
                HomogComponent::new(
                    order - j as f64,
                    PeriodicMatrixFunction::constant(grid_size, p.clone()),
                    PeriodicMatrixFunction::constant(grid_size, m.clone()),
                )
            })
            .collect();
        Self::new(order, comps, exact.map(ExactEvaluator::Multiplier))
    }

    pub fn identity(grid_size: usize, rank: usize, depth: usize) -> Self {
        PolyhomSymbol { inner: LogPolyhomSymbol::identity(grid_size, rank, depth) }
    }

    pub fn as_log(&self) -> &LogPolyhomSymbol {
        &self.inner
    }

    pub fn to_log(&self) -> LogPolyhomSymbol {
        self.inner.clone()
    }

    /// Component `σ_{a−j}`.
    pub fn comp(&self, j: usize) -> &HomogComponent {
        &self.inner.components[j][0]
    }

    pub fn with_cutoff(self, cutoff: Cutoff) -> Self {
        PolyhomSymbol { inner: self.inner.with_cutoff(cutoff) }
    }

    pub fn with_exact(self, exact: Option<ExactEvaluator>) -> Self {
        PolyhomSymbol { inner: self.inner.with_exact(exact) }
    }

    pub fn truncate(&self, depth: usize) -> Result<Self, SymbolError> {
        Ok(PolyhomSymbol { inner: self.inner.truncate(depth)? })
    }

    pub fn scale(&self, s: Complex64) -> Self {
        PolyhomSymbol { inner: self.inner.scale(s) }
    }

    /// Estimate of `C` in `|exact − Σ χ σ_{a−j}| ≤ C (1+|ξ|)^{Re a − N}` over `xis`.
    pub fn remainder_constant(&self, xis: &[f64]) -> Option<f64> {
        let exact = self.inner.exact.as_ref()?;
        let cut = self.inner.cutoff;
        let mut worst: f64 = 0.0;
        for &xi in xis {
            let vals = exact.raw(xi);
            for k in 0..self.inner.grid_size {
                let e = &vals[k.min(vals.len() - 1)];
                let approx = self.inner.expansion_sample(k, xi) * Complex64::new(cut.eval(xi), 0.0);
                let bound = (1.0 + xi.abs()).powf(self.inner.order.re - self.inner.depth as f64);
                worst = worst.max(frob(&(e - approx)) / bound);
            }
        }
        Some(worst)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct ComponentRecord {
    pub j: usize,
    pub l: usize,
    pub degree: [f64; 2],
    pub plus: GridRecord,
    pub minus: GridRecord,
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct SymbolRecord {
    pub order: [f64; 2],
    pub depth: usize,
    pub log_type: usize,
    pub grid_size: usize,
    pub rank: usize,
    pub is_multiplier: bool,
    pub has_exact: bool,
    pub cutoff: Cutoff,
    pub components: Vec<ComponentRecord>,
}
