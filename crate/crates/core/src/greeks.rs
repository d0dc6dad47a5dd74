//! Deltas and vegas of the Asian call.
//!
//! The analytic route differentiates the approximate price through its three
//! stages: moment kernels, the moment fit, and the closed-form payoff
//! expectation. The fit is differentiated implicitly: with `J` the Jacobian
//! of `(mean, variance, third central moment)` in `(a, b, c)`, the price
//! gradient in the moments is `g = J⁻ᵀ ∂V/∂(a,b,c)`.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market_model::Market;
use crate::moment_match::{fit_shifted_lognormal, FitKind, ShiftedLognormalFit};
use crate::moments::MomentModel;
use crate::montecarlo::{basket_average, simulate, McConfig, McEstimate, PathSampler};
use crate::normal::{cdf, pdf};
use crate::pricer::asian_call_price;

/// Determinant scale below which the fit Jacobian is considered singular.
const SINGULAR_JACOBIAN: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum GreeksMethod {
    Analytic,
    FiniteDifference,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct GreeksResult {
    /// `∂V/∂I_0^j` with the basket ratios held fixed.
    pub deltas: Vec<f64>,
    /// `∂V/∂σ_j` per unit of annualized volatility.
    pub vegas: Vec<f64>,
    pub method: GreeksMethod,
    /// Set when the analytic route was abandoned for finite differences.
    pub fallback: Option<String>,
}

/// Finite-difference stencil.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum FdScheme {
    Forward,
    Central,
    /// Five-point stencil, error `O(h⁴)`.
    FourthOrder,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct BumpSpec {
    /// Spot step relative to the spot.
    pub spot_rel: f64,
    /// Absolute volatility step.
    pub vol_abs: f64,
    pub scheme: FdScheme,
}

impl Default for BumpSpec {
    fn default() -> Self {
        Self {
            spot_rel: 1e-4,
            vol_abs: 1e-4,
            scheme: FdScheme::Central,
        }
    }
}

impl BumpSpec {
    pub fn with_scheme(mut self, scheme: FdScheme) -> Self {
        self.scheme = scheme;
        self
    }
}

/// `∂V/∂(a, b, c)` of the shifted-lognormal call, undiscounted.
fn call_parameter_gradient(fit: &ShiftedLognormalFit, strike: f64) -> [f64; 3] {
    let (a, b, c) = (fit.a, fit.b, fit.c);
    let m = fit.scale();
    let gap = strike - a;
    if gap > 1e-300 {
        let d = (b - gap.ln()) / c;
        let d1 = d + c;
        let nd1 = cdf(d1);
        [cdf(d), m * nd1, m * (pdf(d1) + c * nd1)]
    } else {
        [1.0, m, c * m]
    }
}

fn solve_transposed(jac: &[[f64; 3]; 3], rhs: [f64; 3]) -> Option<[f64; 3]> {
    // Jᵀ g = rhs by Cramer's rule
    let t = |i: usize, j: usize| jac[j][i];
    let det3 = |m: [[f64; 3]; 3]| {
        m[0][0] * (m[1][1] * m[2][2] - m[1][2] * m[2][1])
            - m[0][1] * (m[1][0] * m[2][2] - m[1][2] * m[2][0])
            + m[0][2] * (m[1][0] * m[2][1] - m[1][1] * m[2][0])
    };
    let mt = [
        [t(0, 0), t(0, 1), t(0, 2)],
        [t(1, 0), t(1, 1), t(1, 2)],
        [t(2, 0), t(2, 1), t(2, 2)],
    ];
    let det = det3(mt);
    let scale: f64 = jac
        .iter()
        .map(|r| r.iter().map(|x| x.abs()).fold(0.0, f64::max))
        .product();
    if !(det.abs() > SINGULAR_JACOBIAN * scale) {
        return None;
    }
    let mut out = [0.0; 3];
    for (col, o) in out.iter_mut().enumerate() {
        let mut m = mt;
        for row in 0..3 {
            m[row][col] = rhs[row];
        }
        *o = det3(m) / det;
    }
    Some(out)
}

/// Analytic hedge ratios of the three-moment approximation.
pub fn analytic_greeks(market: &Market) -> Result<GreeksResult> {
    let model = MomentModel::asian(market);
    let (moments, grad) = model.moments_with_gradient();
    let df = market.discount_factor();
    let strike = market.basket().strike();
    let m = market.basket().len();

    if moments.is_degenerate() {
        let in_the_money = moments.m1 > strike;
        let deltas = grad
            .spot
            .iter()
            .map(|g| if in_the_money { df * g[0] } else { 0.0 })
            .collect();
        return Ok(GreeksResult {
            deltas,
            vegas: vec![0.0; m],
            method: GreeksMethod::Analytic,
            fallback: None,
        });
    }

    let fit = fit_shifted_lognormal(&moments)?;
    let moment_grad = match fit.kind {
        FitKind::ThreeMoment => solve_transposed(
            &fit.central_jacobian(),
            call_parameter_gradient(&fit, strike),
        ),
        FitKind::SkewFloor => None,
    };
    let Some(g) = moment_grad else {
        let mut fd = fd_greeks(
            market,
            |mk| Ok(asian_call_price(mk)?.value),
            BumpSpec::default(),
        )?;
        fd.fallback = Some(format!(
            "fit Jacobian singular at (a, b, c) = ({}, {}, {}); used central differences",
            fit.a, fit.b, fit.c
        ));
        return Ok(fd);
    };
    let dot = |d: &[f64; 3]| df * (g[0] * d[0] + g[1] * d[1] + g[2] * d[2]);
    Ok(GreeksResult {
        deltas: grad.spot.iter().map(dot).collect(),
        vegas: grad.vol.iter().map(dot).collect(),
        method: GreeksMethod::Analytic,
        fallback: None,
    })
}

fn difference<F>(f: F, h: f64, scheme: FdScheme, one_sided_only: bool) -> Result<f64>
where
    F: Fn(f64) -> Result<f64>,
{
    match scheme {
        _ if one_sided_only => Ok((f(h)? - f(0.0)?) / h),
        FdScheme::Forward => Ok((f(h)? - f(0.0)?) / h),
        FdScheme::Central => Ok((f(h)? - f(-h)?) / (2.0 * h)),
        FdScheme::FourthOrder => {
            Ok((-f(2.0 * h)? + 8.0 * f(h)? - 8.0 * f(-h)? + f(-2.0 * h)?) / (12.0 * h))
        }
    }
}

/// Bump-and-reprice hedge ratios of any pricer.
pub fn fd_greeks<P>(market: &Market, pricer: P, bump: BumpSpec) -> Result<GreeksResult>
where
    P: Fn(&Market) -> Result<f64>,
{
    if !(bump.spot_rel > 0.0 && bump.vol_abs > 0.0) {
        return Err(Error::InvalidInput("bump sizes must be positive".into()));
    }
    let basket = market.basket();
    let reach = match bump.scheme {
        FdScheme::FourthOrder => 2.0,
        _ => 1.0,
    };
    let mut deltas = Vec::with_capacity(basket.len());
    let mut vegas = Vec::with_capacity(basket.len());
    for (j, ix) in basket.indices().iter().enumerate() {
        let h = bump.spot_rel * ix.spot;
        deltas.push(difference(
            |s| pricer(&market.with_basket(basket.with_spot(j, ix.spot + s))?),
            h,
            bump.scheme,
            false,
        )?);
        let h = bump.vol_abs;
        // volatility cannot go negative
        let one_sided = ix.vol < reach * h;
        vegas.push(difference(
            |s| pricer(&market.with_basket(basket.with_vol(j, ix.vol + s))?),
            h,
            bump.scheme,
            one_sided,
        )?);
    }
    Ok(GreeksResult {
        deltas,
        vegas,
        method: GreeksMethod::FiniteDifference,
        fallback: None,
    })
}

/// Monte Carlo hedge ratios by forward differences with common random
/// numbers: base and bumped markets are driven by the same normals, and the
/// difference is estimated path by path.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct McGreeks {
    pub deltas: Vec<McEstimate>,
    pub vegas: Vec<McEstimate>,
}

pub fn mc_fd_greeks(market: &Market, config: &McConfig, bump: BumpSpec) -> Result<McGreeks> {
    if !(bump.spot_rel > 0.0 && bump.vol_abs > 0.0) {
        return Err(Error::InvalidInput("bump sizes must be positive".into()));
    }
    let basket = market.basket();
    let m = basket.len();
    let mut samplers = vec![PathSampler::from_market(market)?];
    let mut steps = Vec::with_capacity(2 * m);
    for (j, ix) in basket.indices().iter().enumerate() {
        let h = bump.spot_rel * ix.spot;
        samplers.push(PathSampler::from_market(
            &market.with_basket(basket.with_spot(j, ix.spot + h))?,
        )?);
        steps.push(h);
    }
    for (j, ix) in basket.indices().iter().enumerate() {
        let h = bump.vol_abs;
        samplers.push(PathSampler::from_market(
            &market.with_basket(basket.with_vol(j, ix.vol + h))?,
        )?);
        steps.push(h);
    }
    let alphas = basket.alphas();
    let strike = basket.strike();
    let df = market.discount_factor();
    let est = simulate(&samplers, config, 2 * m, |paths, out| {
        let base = (basket_average(alphas, paths[0]) - strike).max(0.0);
        for (r, o) in out.iter_mut().enumerate() {
            let bumped = (basket_average(alphas, paths[r + 1]) - strike).max(0.0);
            *o = df * (bumped - base) / steps[r];
        }
    })?;
    Ok(McGreeks {
        deltas: est[..m].to_vec(),
        vegas: est[m..].to_vec(),
    })
}
