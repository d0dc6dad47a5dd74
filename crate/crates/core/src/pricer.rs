//! Closed-form prices under the moment-matched approximations.

use serde::Serialize;

use crate::error::{Error, Result};
use crate::market_model::{
    validate_fund, CorrelationMatrix, DiscountSpec, GuaranteeSpec, IndexSpec, Market, SegFundSpec,
};
use crate::moment_match::{
    fit_lognormal_moments, fit_shifted_lognormal, LognormalFit, ShiftedLognormalFit,
};
use crate::moments::{asian_moments, terminal_moments, MomentSet};
use crate::normal::cdf;

/// `X - a` below this is treated as `X ≤ a`.
const LOG_UNDERFLOW: f64 = 1e-300;

/// Which closed form produced a price.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
pub enum Branch {
    /// Strike strictly inside the support of the fitted variable.
    Integral,
    /// Strike at or below the shift: the call is always exercised, the put never.
    ShiftDominates,
    /// Zero-variance underlying priced at intrinsic value.
    Degenerate,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub enum Fit {
    ShiftedLognormal(ShiftedLognormalFit),
    Lognormal(LognormalFit),
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct PriceResult {
    pub value: f64,
    pub discount_factor: f64,
    pub branch: Branch,
    pub fit: Option<Fit>,
    pub moments: MomentSet,
    /// `X`, the strike of the embedded option (or the guaranteed principal).
    pub strike: f64,
}

impl PriceResult {
    pub fn shifted_fit(&self) -> Option<&ShiftedLognormalFit> {
        match &self.fit {
            Some(Fit::ShiftedLognormal(f)) => Some(f),
            _ => None,
        }
    }
}

/// Discounted `E[max(a + e^{b+cε} - X, 0)]`.
pub fn shifted_lognormal_call(
    fit: &ShiftedLognormalFit,
    strike: f64,
    discount_factor: f64,
) -> (f64, Branch) {
    let (a, b, c) = (fit.a, fit.b, fit.c);
    let gap = strike - a;
    if gap > LOG_UNDERFLOW {
        let d = (b - gap.ln()) / c;
        let value = (a - strike) * cdf(d) + fit.scale() * cdf(c + d);
        (discount_factor * value.max(0.0), Branch::Integral)
    } else {
        (
            discount_factor * (a - strike + fit.scale()),
            Branch::ShiftDominates,
        )
    }
}

/// Discounted `E[max(P - (a + e^{b+cε}), 0)]`.
pub fn shifted_lognormal_put(
    fit: &ShiftedLognormalFit,
    strike: f64,
    discount_factor: f64,
) -> (f64, Branch) {
    let (a, b, c) = (fit.a, fit.b, fit.c);
    let gap = strike - a;
    if gap > LOG_UNDERFLOW {
        let d = (gap.ln() - b) / c;
        let value = gap * cdf(d) - fit.scale() * cdf(d - c);
        (discount_factor * value.max(0.0), Branch::Integral)
    } else {
        (0.0, Branch::ShiftDominates)
    }
}

/// Discounted `E[max(e^{μ+sε} - X, 0)]`.
pub fn lognormal_call(fit: &LognormalFit, strike: f64, discount_factor: f64) -> f64 {
    let s = fit.log_stdev;
    let d1 = (fit.log_mean + s * s - strike.ln()) / s;
    let d2 = d1 - s;
    discount_factor * (fit.mean() * cdf(d1) - strike * cdf(d2)).max(0.0)
}

fn intrinsic_call(moments: MomentSet, strike: f64, df: f64) -> PriceResult {
    PriceResult {
        value: df * (moments.m1 - strike).max(0.0),
        discount_factor: df,
        branch: Branch::Degenerate,
        fit: None,
        moments,
        strike,
    }
}

/// The embedded Asian call under the three-moment shifted lognormal.
pub fn asian_call_price(market: &Market) -> Result<PriceResult> {
    let moments = asian_moments(market);
    let strike = market.basket().strike();
    let df = market.discount_factor();
    if moments.is_degenerate() {
        return Ok(intrinsic_call(moments, strike, df));
    }
    let fit = fit_shifted_lognormal(&moments)?;
    let (value, branch) = shifted_lognormal_call(&fit, strike, df);
    Ok(PriceResult {
        value,
        discount_factor: df,
        branch,
        fit: Some(Fit::ShiftedLognormal(fit)),
        moments,
        strike,
    })
}

/// What the two-moment baseline is fitted to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize)]
pub enum LevyTarget {
    /// The average over the observation schedule.
    #[default]
    Average,
    /// The basket level at maturity only.
    TerminalBasket,
}

/// Two-moment lognormal baseline for the Asian call.
pub fn levy_call_price(market: &Market, target: LevyTarget) -> Result<PriceResult> {
    let moments = match target {
        LevyTarget::Average => asian_moments(market),
        LevyTarget::TerminalBasket => {
            let b = market.basket();
            terminal_moments(
                b.alphas(),
                b.indices(),
                market.correlation(),
                market.discount().rate,
                market.maturity(),
            )?
        }
    };
    let strike = market.basket().strike();
    let df = market.discount_factor();
    if moments.is_degenerate() {
        return Ok(intrinsic_call(moments, strike, df));
    }
    let fit = fit_lognormal_moments(&moments)?;
    Ok(PriceResult {
        value: lognormal_call(&fit, strike, df),
        discount_factor: df,
        branch: Branch::Integral,
        fit: Some(Fit::Lognormal(fit)),
        moments,
        strike,
    })
}

/// Value of the maturity guarantee of a segregated fund: a put struck at the
/// principal on the fee-reduced terminal basket.
pub fn segfund_put_price(
    fund: &SegFundSpec,
    indices: &[IndexSpec],
    corr: &CorrelationMatrix,
    discount: &DiscountSpec,
    maturity: f64,
) -> Result<PriceResult> {
    validate_fund(fund, indices, corr, discount, maturity).into_result()?;
    let weights = fund.terminal_weights(indices);
    let moments = terminal_moments(&weights, indices, corr, discount.rate, maturity)?;
    let principal = fund.principal;
    let df = discount.factor(maturity);
    if moments.is_degenerate() {
        return Ok(PriceResult {
            value: df * (principal - moments.m1).max(0.0),
            discount_factor: df,
            branch: Branch::Degenerate,
            fit: None,
            moments,
            strike: principal,
        });
    }
    let fit = fit_shifted_lognormal(&moments)?;
    let (value, branch) = shifted_lognormal_put(&fit, principal, df);
    Ok(PriceResult {
        value,
        discount_factor: df,
        branch,
        fit: Some(Fit::ShiftedLognormal(fit)),
        moments,
        strike: principal,
    })
}

/// Guaranteed amount plus the embedded Asian call.
pub fn security_value(guarantee: &GuaranteeSpec, market: &Market) -> Result<PriceResult> {
    let mut option = asian_call_price(market)?;
    option.value += option.discount_factor * guarantee.amount();
    Ok(option)
}

/// Present value of the sum of period price returns `Σ (I_i / I_{i-1} - 1)`
/// floored at `floor ≤ -1`, over `times = [t_0, t_1, …, t_M]`.
///
/// A floor at or below -1 never binds, so the value is
/// `e^{-r t_M} (Σ e^{(r-q)(t_i - t_{i-1})} - M)`.
pub fn floored_return_value(times: &[f64], rate: f64, div_yield: f64, floor: f64) -> Result<f64> {
    if floor > -1.0 {
        return Err(Error::Unsupported(format!(
            "floor {floor} above -1 can bind; only non-binding floors have a closed form"
        )));
    }
    if times.len() < 2 {
        return Err(Error::InvalidInput("need at least two reset times".into()));
    }
    if times.iter().any(|t| !t.is_finite()) || times[0] < 0.0 {
        return Err(Error::InvalidInput(
            "reset times must be finite and nonnegative".into(),
        ));
    }
    if times.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("reset times must be increasing".into()));
    }
    let carry = rate - div_yield;
    // expm1 keeps the r = q case exactly zero
    let growth: f64 = times
        .windows(2)
        .map(|w| (carry * (w[1] - w[0])).exp_m1())
        .sum();
    Ok((-rate * times[times.len() - 1]).exp() * growth)
}
