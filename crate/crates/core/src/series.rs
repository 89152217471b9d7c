//! Scalar asymptotic series `Σ_j c_j t^{d−j}` as `t → +∞`.

use num_complex::Complex64;

use crate::linalg::pow_branch;

/// Relative size below which a leading coefficient is treated as cancelled.
const CANCEL_TOL: f64 = 1e-13;

#[derive(Clone, Debug, PartialEq)]
pub struct AsymSeries {
    pub lead: Complex64,
    pub coeffs: Vec<Complex64>,
}

#[derive(Debug, Clone, thiserror::Error, PartialEq)]
pub enum SeriesError {
    #[error("degrees {0} and {1} do not differ by an integer")]
    NonIntegerGap(Complex64, Complex64),
    #[error("series vanishes identically to the retained order")]
    Vanishing,
    #[error("logarithmic growth is not a power series")]
    Logarithm,
}

fn zero() -> Complex64 {
    Complex64::new(0.0, 0.0)
}

impl AsymSeries {
    pub fn constant(v: Complex64, len: usize) -> Self {
        let mut coeffs = vec![zero(); len];
        coeffs[0] = v;
        AsymSeries { lead: zero(), coeffs }
    }

    /// `s · t`.
    pub fn variable(s: Complex64, len: usize) -> Self {
        let mut coeffs = vec![zero(); len];
        coeffs[0] = s;
        AsymSeries { lead: Complex64::new(1.0, 0.0), coeffs }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn eval(&self, t: f64) -> Complex64 {
        self.coeffs
            .iter()
            .enumerate()
            .map(|(j, c)| c * ((self.lead - j as f64) * t.ln()).exp())
            .sum()
    }

    /// Coefficient of `t^{deg}`, zero when absent.
    pub fn coeff_at(&self, deg: Complex64) -> Result<Complex64, SeriesError> {
        let k = integer_gap(self.lead, deg)?;
        if k < 0 || k as usize >= self.len() {
            Ok(zero())
        } else {
            Ok(self.coeffs[k as usize])
        }
    }

    fn align(&self, o: &Self) -> Result<(Complex64, Vec<Complex64>, Vec<Complex64>), SeriesError> {
        let k = integer_gap(self.lead, o.lead)?;
        let len = self.len().min(o.len());
        let (hi_lead, shift_a, shift_b) = if k >= 0 { (self.lead, 0usize, k as usize) } else { (o.lead, (-k) as usize, 0usize) };
        let pick = |s: &Self, shift: usize| -> Vec<Complex64> {
            (0..len).map(|j| if j >= shift { s.coeffs.get(j - shift).copied().unwrap_or(zero()) } else { zero() }).collect()
        };
        Ok((hi_lead, pick(self, shift_a), pick(o, shift_b)))
    }

    pub fn add(&self, o: &Self) -> Result<Self, SeriesError> {
        let (lead, a, b) = self.align(o)?;
        let coeffs = a.iter().zip(&b).map(|(x, y)| x + y).collect();
        Ok(AsymSeries { lead, coeffs }.normalized())
    }

    pub fn sub(&self, o: &Self) -> Result<Self, SeriesError> {
        self.add(&o.scale(Complex64::new(-1.0, 0.0)))
    }

    pub fn scale(&self, s: Complex64) -> Self {
        AsymSeries { lead: self.lead, coeffs: self.coeffs.iter().map(|c| c * s).collect() }
    }

    pub fn mul(&self, o: &Self) -> Self {
        let len = self.len().min(o.len());
        let mut coeffs = vec![zero(); len];
        for i in 0..len {
            for j in 0..len - i {
                coeffs[i + j] += self.coeffs[i] * o.coeffs[j];
            }
        }
        AsymSeries { lead: self.lead + o.lead, coeffs }
    }

    /// Drops cancelled leading terms; the series becomes shorter by one per dropped term.
    fn normalized(mut self) -> Self {
        let scale = self.coeffs.iter().fold(0.0_f64, |m, c| m.max(c.norm()));
        while self.coeffs.len() > 1 && self.coeffs[0].norm() <= CANCEL_TOL * scale {
            self.coeffs.remove(0);
            self.lead -= 1.0;
        }
        self
    }

    /// `f^z` with `arg c_0` taken in `[θ−2π, θ)`.
    pub fn pow(&self, z: Complex64, theta: f64) -> Result<Self, SeriesError> {
        let c0 = self.coeffs[0];
        if c0.norm() == 0.0 {
            return Err(SeriesError::Vanishing);
        }
        let len = self.len();
        let h: Vec<Complex64> = self.coeffs.iter().map(|c| c / c0).collect();
        // g = h^z with h_0 = 1: k g_k = Σ_{i=1}^{k} ((z+1) i − k) h_i g_{k−i}.
        let mut g = vec![zero(); len];
        g[0] = Complex64::new(1.0, 0.0);
        for k in 1..len {
            let mut s = zero();
            for i in 1..=k {
                s += ((z + 1.0) * i as f64 - k as f64) * h[i] * g[k - i];
            }
            g[k] = s / k as f64;
        }
        let lead_c = pow_branch(c0, z, theta);
        Ok(AsymSeries { lead: self.lead * z, coeffs: g.into_iter().map(|v| v * lead_c).collect() })
    }

    pub fn inv(&self) -> Result<Self, SeriesError> {
        self.pow(Complex64::new(-1.0, 0.0), std::f64::consts::PI)
    }

    pub fn truncated(&self, len: usize) -> Self {
        AsymSeries { lead: self.lead, coeffs: self.coeffs.iter().take(len).copied().collect() }
    }
}

pub fn integer_gap(a: Complex64, b: Complex64) -> Result<i64, SeriesError> {
    let d = a - b;
    let k = d.re.round();
    if (d - Complex64::new(k, 0.0)).norm() > 1e-9 {
        return Err(SeriesError::NonIntegerGap(a, b));
    }
    Ok(k as i64)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn cr(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn square_root_of_one_plus_t_squared() {
        let t = AsymSeries::variable(cr(1.0), 8);
        let f = t.mul(&t).add(&AsymSeries::constant(cr(1.0), 8)).unwrap();
        let r = f.pow(cr(0.5), std::f64::consts::PI).unwrap();
        assert_eq!(r.lead, cr(1.0));
        // t (1 + t^{-2})^{1/2} = t + t^{-1}/2 − t^{-3}/8 + t^{-5}/16 …
        let expect = [1.0, 0.0, 0.5, 0.0, -0.125, 0.0, 0.0625, 0.0];
        for (c, e) in r.coeffs.iter().zip(expect) {
            assert!((c - e).norm() < 1e-15);
        }
        assert!((r.eval(10.0) - (101.0f64).sqrt()).norm() < 1e-8);
    }

    #[test]
    fn cancellation_lowers_the_leading_degree() {
        let t = AsymSeries::variable(cr(1.0), 6);
        let a = t.add(&AsymSeries::constant(cr(2.0), 6)).unwrap();
        let d = a.sub(&t).unwrap();
        assert_eq!(d.lead, cr(0.0));
        assert!((d.coeffs[0] - 2.0).norm() < 1e-15);
        assert_eq!(d.len(), 5);
    }

    #[test]
    fn inverse_times_series_is_one() {
        let t = AsymSeries::variable(cr(-1.0), 7);
        let f = t.add(&AsymSeries::constant(Complex64::new(0.3, 1.0), 7)).unwrap();
        let p = f.mul(&f.inv().unwrap());
        assert!((p.coeffs[0] - 1.0).norm() < 1e-15);
        assert!(p.coeffs[1..].iter().all(|c| c.norm() < 1e-14));
    }

    #[test]
    fn non_integer_gap_is_rejected() {
        let a = AsymSeries::constant(cr(1.0), 3);
        let b = AsymSeries::variable(cr(1.0), 3).pow(cr(0.5), std::f64::consts::PI).unwrap();
        assert!(matches!(a.add(&b), Err(SeriesError::NonIntegerGap(..))));
    }
}
