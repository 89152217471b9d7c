//! Matrix-valued functions on the circle sampled on a uniform grid.

use num_complex::Complex64;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};
use std::f64::consts::PI;

use crate::linalg::{frob, identity, inverse, zeros, CMat};

#[derive(Clone, Debug, PartialEq)]
enum Samples {
    /// x-independent; stands for `grid_size` identical samples.
    Constant(CMat),
    Grid(Vec<CMat>),
}

/// `m×m` complex matrices at `x_k = 2πk/g`, `k = 0..g`.
#[derive(Clone, Debug, PartialEq)]
pub struct PeriodicMatrixFunction {
    grid_size: usize,
    rank: usize,
    samples: Samples,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum GridError {
    #[error("grid size {0} is not a power of two")]
    NotPowerOfTwo(usize),
    #[error("expected {expected} samples, got {got}")]
    SampleCount { expected: usize, got: usize },
    #[error("sample {index} has shape {rows}x{cols}, expected {rank}x{rank}")]
    Shape { index: usize, rows: usize, cols: usize, rank: usize },
}

pub fn grid_point(k: usize, g: usize) -> f64 {
    2.0 * PI * k as f64 / g as f64
}

impl PeriodicMatrixFunction {
    pub fn constant(grid_size: usize, value: CMat) -> Self {
        assert!(grid_size.is_power_of_two(), "grid size must be a power of two");
        assert_eq!(value.nrows(), value.ncols());
        PeriodicMatrixFunction { grid_size, rank: value.nrows(), samples: Samples::Constant(value) }
    }

    pub fn zero(grid_size: usize, rank: usize) -> Self {
        Self::constant(grid_size, zeros(rank))
    }

    pub fn identity(grid_size: usize, rank: usize) -> Self {
        Self::constant(grid_size, identity(rank))
    }

    pub fn from_samples(samples: Vec<CMat>) -> Result<Self, GridError> {
        let g = samples.len();
        if !g.is_power_of_two() {
            return Err(GridError::NotPowerOfTwo(g));
        }
        let rank = samples[0].nrows();
        for (index, s) in samples.iter().enumerate() {
            if s.nrows() != rank || s.ncols() != rank {
                return Err(GridError::Shape { index, rows: s.nrows(), cols: s.ncols(), rank });
            }
        }
        Ok(PeriodicMatrixFunction { grid_size: g, rank, samples: Samples::Grid(samples) })
    }

    pub fn from_fn<F: Fn(f64) -> CMat>(grid_size: usize, f: F) -> Self {
        let samples: Vec<CMat> = (0..grid_size).map(|k| f(grid_point(k, grid_size))).collect();
        Self::from_samples(samples).expect("valid grid samples")
    }

    pub fn grid_size(&self) -> usize {
        self.grid_size
    }

    pub fn rank(&self) -> usize {
        self.rank
    }

    pub fn is_constant_repr(&self) -> bool {
        matches!(self.samples, Samples::Constant(_))
    }

    pub fn sample(&self, k: usize) -> &CMat {
        match &self.samples {
            Samples::Constant(c) => c,
            Samples::Grid(v) => &v[k],
        }
    }

    /// All `grid_size` samples.
    pub fn samples(&self) -> Vec<CMat> {
        (0..self.grid_size).map(|k| self.sample(k).clone()).collect()
    }

    /// Largest deviation of a sample from the first one.
    pub fn variation(&self) -> f64 {
        match &self.samples {
            Samples::Constant(_) => 0.0,
            Samples::Grid(v) => v.iter().map(|s| frob(&(s - &v[0]))).fold(0.0, f64::max),
        }
    }

    pub fn max_norm(&self) -> f64 {
        match &self.samples {
            Samples::Constant(c) => frob(c),
            Samples::Grid(v) => v.iter().map(frob).fold(0.0, f64::max),
        }
    }

    /// Replace a grid that is constant to within `tol` by its compact form.
    pub fn compact(self, tol: f64) -> Self {
        if let Samples::Grid(v) = &self.samples {
            if self.variation() <= tol {
                return Self::constant(self.grid_size, v[0].clone());
            }
        }
        self
    }

    pub fn map<F: Fn(&CMat) -> CMat>(&self, f: F) -> Self {
        let samples = match &self.samples {
            Samples::Constant(c) => Samples::Constant(f(c)),
            Samples::Grid(v) => Samples::Grid(v.iter().map(f).collect()),
        };
        let rank = match &samples {
            Samples::Constant(c) => c.nrows(),
            Samples::Grid(v) => v[0].nrows(),
        };
        PeriodicMatrixFunction { grid_size: self.grid_size, rank, samples }
    }

    pub fn zip<F: Fn(&CMat, &CMat) -> CMat>(&self, other: &Self, f: F) -> Self {
        assert_eq!(self.grid_size, other.grid_size, "grid mismatch");
        let samples = match (&self.samples, &other.samples) {
            (Samples::Constant(a), Samples::Constant(b)) => Samples::Constant(f(a, b)),
            _ => Samples::Grid((0..self.grid_size).map(|k| f(self.sample(k), other.sample(k))).collect()),
        };
        let rank = match &samples {
            Samples::Constant(c) => c.nrows(),
            Samples::Grid(v) => v[0].nrows(),
        };
        PeriodicMatrixFunction { grid_size: self.grid_size, rank, samples }
    }

    pub fn add(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a + b)
    }

    pub fn sub(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a - b)
    }

    pub fn scale(&self, s: Complex64) -> Self {
        self.map(|a| a * s)
    }

    /// Pointwise matrix product.
    pub fn mul(&self, o: &Self) -> Self {
        self.zip(o, |a, b| a * b)
    }

    /// Pointwise inverse; `Err(k)` names the first singular gridpoint.
    pub fn inverse(&self) -> Result<Self, usize> {
        match &self.samples {
            Samples::Constant(c) => inverse(c).map(|i| Self::constant(self.grid_size, i)).ok_or(0),
            Samples::Grid(v) => {
                let mut out = Vec::with_capacity(v.len());
                for (k, s) in v.iter().enumerate() {
                    out.push(inverse(s).ok_or(k)?);
                }
                Ok(PeriodicMatrixFunction { grid_size: self.grid_size, rank: self.rank, samples: Samples::Grid(out) })
            }
        }
    }

    pub fn trace_samples(&self) -> Vec<Complex64> {
        (0..self.grid_size).map(|k| self.sample(k).trace()).collect()
    }

    /// `∫_{S¹} tr f(x) dx` by the trapezoid rule.
    pub fn trace_integral(&self) -> Complex64 {
        let t = self.trace_samples();
        let mean: Complex64 = t.iter().sum::<Complex64>() / self.grid_size as f64;
        mean * (2.0 * PI)
    }

    /// Spectral derivative of order `order` in x.
    pub fn derivative(&self, order: usize) -> Self {
        if order == 0 {
            return self.clone();
        }
        let v = match &self.samples {
            Samples::Constant(_) => return Self::zero(self.grid_size, self.rank),
            Samples::Grid(v) => v,
        };
        let g = self.grid_size;
        let m = self.rank;
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(g);
        let inv = planner.plan_fft_inverse(g);
        let mut out: Vec<CMat> = vec![zeros(m); g];
        let mut buf = vec![Complex64::new(0.0, 0.0); g];
        for i in 0..m {
            for j in 0..m {
                for k in 0..g {
                    buf[k] = v[k][(i, j)];
                }
                fwd.process(&mut buf);
                for (k, b) in buf.iter_mut().enumerate() {
                    let freq = if k < g / 2 { k as f64 } else if k == g / 2 { 0.0 } else { k as f64 - g as f64 };
                    let nyquist_even = k == g / 2 && order % 2 == 0 && g > 1;
                    let factor = if nyquist_even {
                        Complex64::new(0.0, g as f64 / 2.0).powu(order as u32)
                    } else {
                        Complex64::new(0.0, freq).powu(order as u32)
                    };
                    *b *= factor / g as f64;
                }
                inv.process(&mut buf);
                for k in 0..g {
                    out[k][(i, j)] = buf[k];
                }
            }
        }
        PeriodicMatrixFunction { grid_size: g, rank: m, samples: Samples::Grid(out) }
    }

    /// Trigonometric interpolation at an arbitrary point.
    pub fn eval_at(&self, x: f64) -> CMat {
        let v = match &self.samples {
            Samples::Constant(c) => return c.clone(),
            Samples::Grid(v) => v,
        };
        let g = self.grid_size;
        let m = self.rank;
        let mut out = zeros(m);
        let mut planner = FftPlanner::<f64>::new();
        let fwd = planner.plan_fft_forward(g);
        let mut buf = vec![Complex64::new(0.0, 0.0); g];
        for i in 0..m {
            for j in 0..m {
                for k in 0..g {
                    buf[k] = v[k][(i, j)];
                }
                fwd.process(&mut buf);
                let mut s = Complex64::new(0.0, 0.0);
                for (k, b) in buf.iter().enumerate() {
                    let val = if k == g / 2 && g > 1 {
                        b * (g as f64 / 2.0 * x).cos()
                    } else {
                        let freq = if k < g / 2 { k as f64 } else { k as f64 - g as f64 };
                        b * Complex64::from_polar(1.0, freq * x)
                    };
                    s += val;
                }
                out[(i, j)] = s / g as f64;
            }
        }
        out
    }

    pub fn to_record(&self) -> GridRecord {
        let samples = self.samples();
        GridRecord {
            grid_size: self.grid_size,
            rank: self.rank,
            constant: self.is_constant_repr(),
            re: samples.iter().map(|s| s.iter().map(|z| z.re).collect()).collect(),
            im: samples.iter().map(|s| s.iter().map(|z| z.im).collect()).collect(),
        }
    }

    pub fn from_record(r: &GridRecord) -> Result<Self, GridError> {
        if r.re.len() != r.grid_size || r.im.len() != r.grid_size {
            return Err(GridError::SampleCount { expected: r.grid_size, got: r.re.len().min(r.im.len()) });
        }
        let mats: Vec<CMat> = r
            .re
            .iter()
            .zip(&r.im)
            .map(|(re, im)| {
                CMat::from_iterator(r.rank, r.rank, re.iter().zip(im).map(|(a, b)| Complex64::new(*a, *b)))
            })
            .collect();
        let f = Self::from_samples(mats)?;
        Ok(if r.constant { f.compact(f64::INFINITY) } else { f })
    }
}

/// Column-major serialization of a sampled function.
#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct GridRecord {
    pub grid_size: usize,
    pub rank: usize,
    pub constant: bool,
    pub re: Vec<Vec<f64>>,
    pub im: Vec<Vec<f64>>,
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::c;

    fn scalar_fn(g: usize, f: impl Fn(f64) -> f64) -> PeriodicMatrixFunction {
        PeriodicMatrixFunction::from_fn(g, |x| CMat::from_element(1, 1, c(f(x))))
    }

    #[test]
    fn derivative_of_constant_grid_vanishes() {
        let f = PeriodicMatrixFunction::from_samples(vec![CMat::from_element(2, 2, c(3.0)); 16]).unwrap();
        assert!(f.derivative(1).max_norm() < 1e-12);
        assert!(f.derivative(3).max_norm() < 1e-12);
    }

    #[test]
    fn spectral_derivative_of_trig_polynomial() {
        let f = scalar_fn(64, |x| (2.0 * x).sin() + 0.5 * (3.0 * x).cos());
        let d1 = f.derivative(1);
        let d2 = f.derivative(2);
        for k in 0..64 {
            let x = grid_point(k, 64);
            let e1 = 2.0 * (2.0 * x).cos() - 1.5 * (3.0 * x).sin();
            let e2 = -4.0 * (2.0 * x).sin() - 4.5 * (3.0 * x).cos();
            assert!((d1.sample(k)[(0, 0)] - e1).norm() < 1e-12);
            assert!((d2.sample(k)[(0, 0)] - e2).norm() < 1e-11);
        }
    }

    #[test]
    fn interpolation_and_integral() {
        let f = scalar_fn(32, |x| 2.0 + x.sin());
        assert!((f.eval_at(0.3)[(0, 0)] - (2.0 + 0.3_f64.sin())).norm() < 1e-13);
        assert!((f.trace_integral() - 4.0 * PI).norm() < 1e-13);
    }

    #[test]
    fn record_round_trip() {
        let f = scalar_fn(8, |x| x.cos());
        let g = PeriodicMatrixFunction::from_record(&f.to_record()).unwrap();
        assert_eq!(f, g);
    }
}
