//! Moment-matched approximating distributions.
//!
//! The three-moment fit solves for `a + exp(b + c·ε)` in closed form. With
//! `m = exp(b + c²/2)` and `w = exp(c²)` the family has
//!
//! ```text
//! mean = a + m,   variance = m² (w - 1),   skew = (w + 2) √(w - 1)
//! ```
//!
//! so writing `x = √(w - 1)` the skewness condition is the depressed cubic
//! `x³ + 3x - η = 0`. Its discriminant is positive for every η, hence one
//! real root, given by Cardano as `∛(η/2 + √(η²/4 + 1)) + ∛(η/2 - √(η²/4 + 1))`,
//! evaluated here in the equivalent form `2 sinh(asinh(η/2) / 3)` which has
//! no cancellation at either end. Variance then fixes `m` and the mean
//! fixes `a`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::moments::MomentSet;

/// Below this skewness the three-moment fit falls back to the two-moment one.
pub const SKEW_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FitKind {
    /// Exact solution of the three moment equations.
    ThreeMoment,
    /// Skewness below [`SKEW_FLOOR`]: plain lognormal with `a = 0`.
    SkewFloor,
}

/// `a + exp(b + c·ε)` with ε standard normal.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct ShiftedLognormalFit {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub kind: FitKind,
}

impl ShiftedLognormalFit {
    pub fn new(a: f64, b: f64, c: f64) -> Self {
        Self {
            a,
            b,
            c,
            kind: FitKind::ThreeMoment,
        }
    }

    /// `E[exp(b + c·ε)] = exp(b + c²/2)`.
    pub fn scale(&self) -> f64 {
        (self.b + 0.5 * self.c * self.c).exp()
    }

    /// Right-hand sides of the matching system: `(E[S], E[S²], E[S³])`.
    pub fn raw_moments(&self) -> [f64; 3] {
        let (a, b, c) = (self.a, self.b, self.c);
        let c2 = c * c;
        let e1 = (b + 0.5 * c2).exp();
        let e2 = (2.0 * b + 2.0 * c2).exp();
        let e3 = (3.0 * b + 4.5 * c2).exp();
        [
            a + e1,
            a * a + 2.0 * a * e1 + e2,
            a * a * a + 3.0 * a * a * e1 + 3.0 * a * e2 + e3,
        ]
    }

    /// `(mean, variance, third central moment)` of the fitted variable.
    pub fn central_moments(&self) -> [f64; 3] {
        let m = self.scale();
        let wm1 = (self.c * self.c).exp_m1();
        [self.a + m, m * m * wm1, m * m * m * wm1 * wm1 * (wm1 + 3.0)]
    }

    pub fn moment_set(&self) -> MomentSet {
        let [m1, m2, m3] = self.raw_moments();
        let [_, mu2, mu3] = self.central_moments();
        MomentSet {
            m1,
            m2,
            m3,
            mu2,
            mu3,
            skew: Some(mu3 / mu2.powf(1.5)),
        }
    }

    /// Jacobian of `(mean, variance, third central moment)` in `(a, b, c)`,
    /// row-major.
    pub fn central_jacobian(&self) -> [[f64; 3]; 3] {
        let c = self.c;
        let m = self.scale();
        let w = (c * c).exp();
        let wm1 = (c * c).exp_m1();
        let mu2 = m * m * wm1;
        let mu3 = m * m * m * wm1 * wm1 * (w + 2.0);
        // dm/db = m, dm/dc = c m, dw/dc = 2 c w
        let dmu2_dc = 2.0 * c * m * m * (2.0 * w - 1.0);
        let dmu3_dc = 3.0 * c * mu3 + m * m * m * (2.0 * wm1 * (w + 2.0) + wm1 * wm1) * 2.0 * c * w;
        [
            [1.0, m, c * m],
            [0.0, 2.0 * mu2, dmu2_dc],
            [0.0, 3.0 * mu3, dmu3_dc],
        ]
    }
}

/// `exp(log_mean + log_stdev·ε)`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct LognormalFit {
    pub log_mean: f64,
    pub log_stdev: f64,
}

impl LognormalFit {
    pub fn mean(&self) -> f64 {
        (self.log_mean + 0.5 * self.log_stdev * self.log_stdev).exp()
    }

    pub fn second_moment(&self) -> f64 {
        (2.0 * self.log_mean + 2.0 * self.log_stdev * self.log_stdev).exp()
    }
}

/// Real root of `x³ + 3x - η = 0`.
pub fn skew_cubic_root(eta: f64) -> f64 {
    2.0 * ((0.5 * eta).asinh() / 3.0).sinh()
}

/// Three-moment shifted lognormal fit.
pub fn fit_shifted_lognormal(moments: &MomentSet) -> Result<ShiftedLognormalFit> {
    fit_central(moments.m1, moments.mu2, moments.mu3)
}

/// Three-moment fit from the mean and the second and third central moments.
pub fn fit_central(m1: f64, mu2: f64, mu3: f64) -> Result<ShiftedLognormalFit> {
    if !(m1.is_finite() && mu2.is_finite() && mu3.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "non-finite moments (mean {m1}, variance {mu2}, third {mu3})"
        )));
    }
    if mu2 <= crate::moments::DEGENERATE_VARIANCE * m1 * m1 || mu2 <= 0.0 {
        return Err(Error::Degenerate(mu2));
    }
    let eta = mu3 / mu2.powf(1.5);
    if eta <= 0.0 {
        return Err(Error::UnmatchableSkew(eta));
    }
    if eta < SKEW_FLOOR {
        let log_var = (mu2 / (m1 * m1)).ln_1p();
        if !(m1 > 0.0) {
            return Err(Error::UnmatchableSkew(eta));
        }
        let b = m1.ln() - 0.5 * log_var;
        return Ok(ShiftedLognormalFit {
            a: 0.0,
            b,
            c: log_var.sqrt(),
            kind: FitKind::SkewFloor,
        });
    }
    let x = skew_cubic_root(eta);
    let log_w = (x * x).ln_1p();
    let c = log_w.sqrt();
    let m = mu2.sqrt() / x;
    let b = m.ln() - 0.5 * log_w;
    Ok(ShiftedLognormalFit {
        a: m1 - m,
        b,
        c,
        kind: FitKind::ThreeMoment,
    })
}

/// Two-moment lognormal fit from raw moments.
pub fn fit_lognormal(m1: f64, m2: f64) -> Result<LognormalFit> {
    if !(m1.is_finite() && m2.is_finite()) || !(m1 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need a positive finite mean, got ({m1}, {m2})"
        )));
    }
    let ratio = m2 / (m1 * m1);
    if !(ratio > 1.0) {
        return Err(Error::Degenerate(m2 - m1 * m1));
    }
    lognormal_from_log_variance(m1, ratio.ln())
}

/// Two-moment fit using the accurately summed variance.
pub fn fit_lognormal_moments(moments: &MomentSet) -> Result<LognormalFit> {
    if moments.is_degenerate() {
        return Err(Error::Degenerate(moments.mu2));
    }
    if !(moments.m1 > 0.0) {
        return Err(Error::InvalidInput(format!(
            "need a positive mean, got {}",
            moments.m1
        )));
    }
    lognormal_from_log_variance(
        moments.m1,
        (moments.mu2 / (moments.m1 * moments.m1)).ln_1p(),
    )
}

fn lognormal_from_log_variance(m1: f64, log_var: f64) -> Result<LognormalFit> {
    Ok(LognormalFit {
        log_mean: m1.ln() - 0.5 * log_var,
        log_stdev: log_var.sqrt(),
    })
}
