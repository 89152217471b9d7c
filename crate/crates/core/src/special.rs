//! Hurwitz zeta with s-derivatives, Stieltjes constants and finite parts of power sums.

use num_complex::Complex64;

/// Truncated Taylor series in a small parameter `ε`; `c[k]` is the coefficient of `ε^k`.
#[derive(Clone, Debug, PartialEq)]
pub struct Jet {
    pub c: Vec<Complex64>,
}

impl Jet {
    pub fn constant(v: Complex64, len: usize) -> Jet {
        let mut c = vec![Complex64::new(0.0, 0.0); len];
        c[0] = v;
        Jet { c }
    }

    /// `v + ε`.
    pub fn variable(v: Complex64, len: usize) -> Jet {
        let mut j = Jet::constant(v, len);
        if len > 1 {
            j.c[1] = Complex64::new(1.0, 0.0);
        }
        j
    }

    pub fn len(&self) -> usize {
        self.c.len()
    }

    pub fn is_empty(&self) -> bool {
        self.c.is_empty()
    }

    pub fn add(&self, o: &Jet) -> Jet {
        Jet { c: self.c.iter().zip(&o.c).map(|(a, b)| a + b).collect() }
    }

    pub fn scale(&self, s: Complex64) -> Jet {
        Jet { c: self.c.iter().map(|a| a * s).collect() }
    }

    pub fn mul(&self, o: &Jet) -> Jet {
        let n = self.len();
        let mut c = vec![Complex64::new(0.0, 0.0); n];
        for i in 0..n {
            for j in 0..n - i {
                c[i + j] += self.c[i] * o.c[j];
            }
        }
        Jet { c }
    }

    pub fn recip(&self) -> Jet {
        let n = self.len();
        let a0 = self.c[0];
        let mut r = vec![Complex64::new(0.0, 0.0); n];
        r[0] = a0.inv();
        for k in 1..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                s += self.c[j] * r[k - j];
            }
            r[k] = -s / a0;
        }
        Jet { c: r }
    }

    pub fn exp(&self) -> Jet {
        let n = self.len();
        let mut r = vec![Complex64::new(0.0, 0.0); n];
        r[0] = self.c[0].exp();
        for k in 1..n {
            let mut s = Complex64::new(0.0, 0.0);
            for j in 1..=k {
                s += self.c[j] * r[k - j] * j as f64;
            }
            r[k] = s / k as f64;
        }
        Jet { c: r }
    }

    /// Derivatives `f^{(k)}` recovered from Taylor coefficients.
    pub fn derivatives(&self) -> Vec<Complex64> {
        let mut fact = 1.0;
        self.c
            .iter()
            .enumerate()
            .map(|(k, v)| {
                if k > 0 {
                    fact *= k as f64;
                }
                v * fact
            })
            .collect()
    }
}

const BERNOULLI_2K: [f64; 15] = [
    1.0 / 6.0,
    -1.0 / 30.0,
    1.0 / 42.0,
    -1.0 / 30.0,
    5.0 / 66.0,
    -691.0 / 2730.0,
    7.0 / 6.0,
    -3617.0 / 510.0,
    43867.0 / 798.0,
    -174611.0 / 330.0,
    854513.0 / 138.0,
    -236364091.0 / 2730.0,
    8553103.0 / 6.0,
    -23749461029.0 / 870.0,
    8615841276005.0 / 14322.0,
];

/// Euler–Maclaurin evaluation of `ζ(s + ε, q)` as a jet of length `len`.
/// `q > 0`, `s ≠ 1`.
pub fn hurwitz_jet(s: Complex64, q: f64, len: usize) -> Jet {
    assert!(q > 0.0, "Hurwitz parameter must be positive");
    assert!((s - 1.0).norm() > 1e-14, "Hurwitz zeta pole at s = 1");
    let one = Complex64::new(1.0, 0.0);
    let target = 10.0 + 1.5 * s.norm();
    let n_direct = if q >= target { 0 } else { (target - q).ceil() as usize };
    let mut acc = Jet::constant(Complex64::new(0.0, 0.0), len);
    // (k+q)^{-s-ε} = (k+q)^{-s} exp(-ε log(k+q))
    let power_jet = |base: f64, shift: Complex64| -> Jet {
        let l = base.ln();
        let lead = (-(s + shift) * l).exp();
        let mut c = Vec::with_capacity(len);
        let mut term = lead;
        for m in 0..len {
            if m > 0 {
                term = term * (-l) / m as f64;
            }
            c.push(term);
        }
        Jet { c }
    };
    for k in 0..n_direct {
        acc = acc.add(&power_jet(k as f64 + q, Complex64::new(0.0, 0.0)));
    }
    let big = n_direct as f64 + q;
    let sj = Jet::variable(s, len);
    // (N+q)^{1-s}/(s-1)
    let tail = power_jet(big, -one).mul(&sj.add(&Jet::constant(-one, len)).recip());
    acc = acc.add(&tail);
    acc = acc.add(&power_jet(big, Complex64::new(0.0, 0.0)).scale(Complex64::new(0.5, 0.0)));
    // Σ B_{2k}/(2k)! (s)_{2k-1} (N+q)^{-s-2k+1}
    let mut rising = sj.clone();
    let mut fact = 2.0;
    for (k, b) in BERNOULLI_2K.iter().enumerate() {
        let kk = k + 1;
        if kk > 1 {
            let a = Jet::variable(s + Complex64::new((2 * kk - 3) as f64, 0.0), len);
            let bb = Jet::variable(s + Complex64::new((2 * kk - 2) as f64, 0.0), len);
            rising = rising.mul(&a).mul(&bb);
            fact *= ((2 * kk - 1) * (2 * kk)) as f64;
        }
        let term = rising
            .mul(&power_jet(big, Complex64::new((2 * kk - 1) as f64, 0.0)))
            .scale(Complex64::new(b / fact, 0.0));
        acc = acc.add(&term);
        let tn = term.c.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        let an = acc.c.iter().fold(0.0_f64, |m, v| m.max(v.norm()));
        if tn < 1e-18 * an.max(1e-300) {
            break;
        }
    }
    acc
}

pub fn hurwitz_zeta(s: Complex64, q: f64) -> Complex64 {
    hurwitz_jet(s, q, 1).c[0]
}

pub fn riemann_zeta(s: Complex64) -> Complex64 {
    hurwitz_zeta(s, 1.0)
}

/// Derivatives `ζ^{(l)}(s)`, `l = 0..=order`.
pub fn riemann_zeta_derivatives(s: Complex64, order: usize) -> Vec<Complex64> {
    hurwitz_jet(s, 1.0, order + 1).derivatives()
}

/// Stieltjes constants γ_0 … γ_4 (γ_0 is Euler's constant).
pub const STIELTJES: [f64; 5] = [
    0.577_215_664_901_532_9,
    -0.072_815_845_483_676_72,
    -0.009_690_363_192_872_318,
    0.002_053_834_420_303_346,
    0.002_325_370_065_467_300,
];

/// Finite part as `R → ∞` of `Σ_{n=1}^{R} n^d log^l n`.
///
/// For `d ≠ −1` this is `(−1)^l ζ^{(l)}(−d)`; at `d = −1` it is the Stieltjes constant `γ_l`.
pub fn fp_power_log_sum(d: Complex64, l: usize) -> Complex64 {
    if (d + 1.0).norm() < 1e-9 {
        assert!(l < STIELTJES.len(), "log power too large");
        return Complex64::new(STIELTJES[l], 0.0);
    }
    let ders = riemann_zeta_derivatives(-d, l);
    let sign = if l % 2 == 0 { 1.0 } else { -1.0 };
    ders[l] * sign
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::f64::consts::PI;

    fn cr(x: f64) -> Complex64 {
        Complex64::new(x, 0.0)
    }

    #[test]
    fn zeta_known_values() {
        assert!((riemann_zeta(cr(2.0)) - PI * PI / 6.0).norm() < 1e-14);
        assert!((riemann_zeta(cr(0.0)) + 0.5).norm() < 1e-14);
        assert!((riemann_zeta(cr(-1.0)) + 1.0 / 12.0).norm() < 1e-14);
        assert!((riemann_zeta(cr(-2.0))).norm() < 1e-12);
        let d = riemann_zeta_derivatives(cr(0.0), 1);
        assert!((d[1] + 0.5 * (2.0 * PI).ln()).norm() < 1e-13);
    }

    #[test]
    fn hurwitz_matches_shifted_sum() {
        let s = Complex64::new(2.5, 0.7);
        let direct: Complex64 = (0..10).map(|k| (cr(k as f64 + 1.0)).powc(-s)).sum();
        let lhs = riemann_zeta(s) - direct;
        assert!((lhs - hurwitz_zeta(s, 11.0)).norm() < 1e-14);
    }

    #[test]
    fn stieltjes_constants_agree_with_laurent_expansion() {
        // ζ(1+ε) = 1/ε + Σ (−1)^k γ_k ε^k / k!
        let s = 1.0 + 1e-3;
        let eps = s - 1.0;
        let val = riemann_zeta(cr(s));
        let series = 1.0 / eps + STIELTJES[0] - STIELTJES[1] * eps + STIELTJES[2] * eps * eps / 2.0;
        assert!((val.re - series).abs() < 1e-11);
        // The log-weighted partial sums converge to γ_1.
        let r = 200_000usize;
        let mut s = 0.0;
        for n in 1..=r {
            let x = n as f64;
            s += x.ln() / x;
        }
        let lr = (r as f64).ln();
        let fp = s - lr * lr / 2.0 - lr / (2.0 * r as f64);
        assert!((fp - STIELTJES[1]).abs() < 1e-9);
    }
}
