//! Small dense complex matrices and contour-based matrix functions.

use nalgebra::DMatrix;
use num_complex::Complex64;
use std::f64::consts::PI;

use crate::quad::gauss_legendre;

pub type CMat = DMatrix<Complex64>;

pub const I: Complex64 = Complex64 { re: 0.0, im: 1.0 };

pub fn c(re: f64) -> Complex64 {
    Complex64::new(re, 0.0)
}

pub fn identity(m: usize) -> CMat {
    CMat::identity(m, m)
}

pub fn zeros(m: usize) -> CMat {
    CMat::zeros(m, m)
}

pub fn scalar(m: usize, v: Complex64) -> CMat {
    CMat::identity(m, m) * v
}

pub fn trace(a: &CMat) -> Complex64 {
    a.trace()
}

pub fn max_abs(a: &CMat) -> f64 {
    a.iter().fold(0.0_f64, |acc, z| acc.max(z.norm()))
}

pub fn frob(a: &CMat) -> f64 {
    a.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

/// Inverse with closed forms for ranks one and two.
pub fn inverse(a: &CMat) -> Option<CMat> {
    match a.nrows() {
        1 => {
            let v = a[(0, 0)];
            if v.norm() == 0.0 {
                None
            } else {
                Some(CMat::from_element(1, 1, v.inv()))
            }
        }
        2 => {
            let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
            let det = p * s - q * r;
            if det.norm() == 0.0 {
                return None;
            }
            let d = det.inv();
            Some(CMat::from_row_slice(2, 2, &[s * d, -q * d, -r * d, p * d]))
        }
        _ => a.clone().try_inverse(),
    }
}

pub fn smallest_singular_value(a: &CMat) -> f64 {
    if a.nrows() == 1 {
        return a[(0, 0)].norm();
    }
    let sv = a.clone().singular_values();
    sv.iter().cloned().fold(f64::INFINITY, f64::min)
}

/// Eigenvalues through the complex Schur form.
pub fn eigenvalues(a: &CMat) -> Vec<Complex64> {
    match a.nrows() {
        1 => vec![a[(0, 0)]],
        2 => {
            let (p, q, r, s) = (a[(0, 0)], a[(0, 1)], a[(1, 0)], a[(1, 1)]);
            let half_tr = (p + s) * 0.5;
            let disc = ((p - s) * 0.5).powi(2) + q * r;
            let root = disc.sqrt();
            let l1 = half_tr + root;
            let l2 = half_tr - root;
            // Refine the smaller root through the determinant to avoid cancellation.
            let det = p * s - q * r;
            if l1.norm() >= l2.norm() && l1.norm() > 0.0 {
                vec![l1, det / l1]
            } else if l2.norm() > 0.0 {
                vec![det / l2, l2]
            } else {
                vec![l1, l2]
            }
        }
        _ => {
            let schur = nalgebra::linalg::Schur::new(a.clone());
            let (_, t) = schur.unpack();
            (0..t.nrows()).map(|i| t[(i, i)]).collect()
        }
    }
}

/// Argument of `z` in the half-open window `[theta - 2π, theta)`.
pub fn branch_arg(z: Complex64, theta: f64) -> f64 {
    let mut a = z.arg();
    while a >= theta {
        a -= 2.0 * PI;
    }
    while a < theta - 2.0 * PI {
        a += 2.0 * PI;
    }
    a
}

pub fn log_branch(z: Complex64, theta: f64) -> Complex64 {
    Complex64::new(z.norm().ln(), branch_arg(z, theta))
}

/// `z^p` with `arg z ∈ [θ−2π, θ)`.
pub fn pow_branch(z: Complex64, p: Complex64, theta: f64) -> Complex64 {
    (p * log_branch(z, theta)).exp()
}

/// Distance from `z` to the closed ray of angle `theta`.
pub fn distance_to_ray(z: Complex64, theta: f64) -> f64 {
    let dir = Complex64::from_polar(1.0, theta);
    let t = (z * dir.conj()).re;
    if t <= 0.0 {
        z.norm()
    } else {
        (z - dir * t).norm()
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub enum MatFn {
    Power(Complex64),
    Log,
}

impl MatFn {
    /// Scalar value at `rho e^{i arg}` with the argument given explicitly.
    pub fn eval_polar(&self, rho: f64, arg: f64) -> Complex64 {
        match *self {
            MatFn::Power(p) => (p * Complex64::new(rho.ln(), arg)).exp(),
            MatFn::Log => Complex64::new(rho.ln(), arg),
        }
    }

    pub fn eval(&self, z: Complex64, theta: f64) -> Complex64 {
        self.eval_polar(z.norm(), branch_arg(z, theta))
    }
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum MatFnError {
    #[error("matrix is singular")]
    Singular,
    #[error("eigenvalue {eig} lies within {dist:e} of the cut ray at angle {theta}")]
    OnCut { eig: Complex64, dist: f64, theta: f64 },
    #[error("keyhole quadrature did not converge (relative change {0:e})")]
    NoConvergence(f64),
}

fn resolvent_at(lambda: Complex64, a: &CMat) -> CMat {
    let m = a.nrows();
    let shifted = scalar(m, lambda) - a;
    inverse(&shifted).unwrap_or_else(|| zeros(m))
}

fn keyhole_sum(a: &CMat, f: MatFn, theta: f64, r: f64, big_r: f64, p: usize) -> CMat {
    let m = a.nrows();
    let (xs, ws) = gauss_legendre(p);
    let mut acc = zeros(m);
    let two_pi_i = Complex64::new(0.0, 2.0 * PI);
    // Arcs: outer counterclockwise, inner clockwise, both over [θ−2π, θ].
    let arc_panels = 8;
    let h = 2.0 * PI / arc_panels as f64;
    for (radius, sign) in [(big_r, 1.0), (r, -1.0)] {
        for k in 0..arc_panels {
            let lo = theta - 2.0 * PI + k as f64 * h;
            for (x, w) in xs.iter().zip(&ws) {
                let phi = lo + 0.5 * h * (x + 1.0);
                let lambda = Complex64::from_polar(radius, phi);
                let weight = f.eval_polar(radius, phi) * I * lambda * (0.5 * h * w * sign) / two_pi_i;
                acc += resolvent_at(lambda, a) * weight;
            }
        }
    }
    // Both sides of the cut, in logarithmic radius.
    let (u0, u1) = (r.ln(), big_r.ln());
    let panels = (((u1 - u0) / 0.5).ceil() as usize).max(1);
    let hu = (u1 - u0) / panels as f64;
    let dir = Complex64::from_polar(1.0, theta);
    for k in 0..panels {
        let lo = u0 + k as f64 * hu;
        for (x, w) in xs.iter().zip(&ws) {
            let u = lo + 0.5 * hu * (x + 1.0);
            let rho = u.exp();
            let jump = f.eval_polar(rho, theta - 2.0 * PI) - f.eval_polar(rho, theta);
            let weight = jump * dir * (rho * 0.5 * hu * w) / two_pi_i;
            acc += resolvent_at(dir * rho, a) * weight;
        }
    }
    acc
}

/// Matrix function by a keyhole Cauchy integral around the spectrum in the plane slit along
/// the ray of angle `theta`. Rank-one input is evaluated directly.
pub fn matfun_cut(a: &CMat, f: MatFn, theta: f64, tol: f64) -> Result<CMat, MatFnError> {
    let m = a.nrows();
    if m == 1 {
        let v = a[(0, 0)];
        if v.norm() == 0.0 {
            return Err(MatFnError::Singular);
        }
        if distance_to_ray(v, theta) < 1e-14 * v.norm() {
            return Err(MatFnError::OnCut { eig: v, dist: 0.0, theta });
        }
        return Ok(CMat::from_element(1, 1, f.eval(v, theta)));
    }
    let inv = inverse(a).ok_or(MatFnError::Singular)?;
    let norm = frob(a);
    let r = 0.5 / frob(&inv);
    let big_r = 1.5 * norm;
    let mut prev = keyhole_sum(a, f, theta, r, big_r, 8);
    let mut change = f64::INFINITY;
    for p in [16usize, 32, 64] {
        let next = keyhole_sum(a, f, theta, r, big_r, p);
        let scale = frob(&next).max(1.0);
        change = frob(&(&next - &prev)) / scale;
        prev = next;
        if change < tol {
            return Ok(prev);
        }
    }
    Err(MatFnError::NoConvergence(change))
}
