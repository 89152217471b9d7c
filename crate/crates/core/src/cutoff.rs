//! Smooth cut-off functions `χ` vanishing near `ξ = 0` and equal to one at infinity.

use serde::{Deserialize, Serialize};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum CutoffProfile {
    /// Transition built from `e^{-1/t}`.
    Exp,
    /// Transition built from `e^{-1/t²}`.
    ExpSquared,
}

/// `χ(ξ) = 0` for `|ξ| ≤ inner`, `χ(ξ) = 1` for `|ξ| ≥ outer`.
///
/// With `t = (|ξ| − inner)/(outer − inner)` and `f(t) = e^{−1/t}` (or `e^{−1/t²}`),
/// `χ = f(t) / (f(t) + f(1 − t))` on `0 < t < 1`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Cutoff {
    pub inner: f64,
    pub outer: f64,
    pub profile: CutoffProfile,
}

impl Default for Cutoff {
    fn default() -> Self {
        Cutoff::standard()
    }
}

impl Cutoff {
    pub fn standard() -> Self {
        Cutoff { inner: 0.5, outer: 1.0, profile: CutoffProfile::Exp }
    }

    /// A second admissible cut-off whose transition straddles `|ξ| = 1`.
    pub fn alternate() -> Self {
        Cutoff { inner: 0.75, outer: 1.5, profile: CutoffProfile::ExpSquared }
    }

    fn bump(&self, t: f64) -> f64 {
        if t <= 0.0 {
            return 0.0;
        }
        match self.profile {
            CutoffProfile::Exp => (-1.0 / t).exp(),
            CutoffProfile::ExpSquared => (-1.0 / (t * t)).exp(),
        }
    }

    pub fn eval(&self, xi: f64) -> f64 {
        let a = xi.abs();
        if a <= self.inner {
            return 0.0;
        }
        if a >= self.outer {
            return 1.0;
        }
        let t = (a - self.inner) / (self.outer - self.inner);
        let f = self.bump(t);
        let g = self.bump(1.0 - t);
        f / (f + g)
    }
}
