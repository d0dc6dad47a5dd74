//! Instrument and market-data inputs.
//!
//! Constructors are cheap and mostly unchecked so that malformed data can be
//! described by [`validate_market`]; pricing goes through [`Market::new`],
//! which refuses anything the validator flags.

use std::fmt;

use chrono::NaiveDate;
use serde::Serialize;

use crate::error::{Error, Result};
use crate::montecarlo::cholesky_psd;

/// Tolerance on negative pivots when checking positive semi-definiteness.
pub const PSD_TOLERANCE: f64 = 1e-10;

const SYMMETRY_TOLERANCE: f64 = 1e-12;
const ALLOCATION_TOLERANCE: f64 = 1e-12;

/// One equity index following geometric Brownian motion.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IndexSpec {
    pub name: String,
    pub spot: f64,
    /// Annualized lognormal volatility.
    pub vol: f64,
    /// Continuous dividend yield.
    pub div_yield: f64,
    /// Replaces the risk-neutral drift `r - q` when set.
    pub drift_override: Option<f64>,
}

impl IndexSpec {
    pub fn new(name: impl Into<String>, spot: f64, vol: f64) -> Self {
        Self {
            name: name.into(),
            spot,
            vol,
            div_yield: 0.0,
            drift_override: None,
        }
    }

    pub fn with_div_yield(mut self, q: f64) -> Self {
        self.div_yield = q;
        self
    }

    pub fn with_drift(mut self, mu: f64) -> Self {
        self.drift_override = Some(mu);
        self
    }

    /// Effective drift under the pricing measure.
    pub fn drift(&self, rate: f64) -> f64 {
        self.drift_override.unwrap_or(rate - self.div_yield)
    }
}

/// Instantaneous correlations between the index Brownian motions.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct CorrelationMatrix {
    dim: usize,
    entries: Vec<f64>,
}

impl CorrelationMatrix {
    /// Builds from rows. Only the shape is checked here.
    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let dim = rows.len();
        if let Some((i, row)) = rows.iter().enumerate().find(|(_, r)| r.len() != dim) {
            return Err(Error::DimensionMismatch(format!(
                "correlation row {i} has {} entries, expected {dim}",
                row.len()
            )));
        }
        Ok(Self {
            dim,
            entries: rows.iter().flatten().copied().collect(),
        })
    }

    pub fn identity(dim: usize) -> Self {
        Self::uniform(dim, 0.0)
    }

    /// Unit diagonal with a single off-diagonal correlation.
    pub fn uniform(dim: usize, rho: f64) -> Self {
        let mut entries = vec![rho; dim * dim];
        for i in 0..dim {
            entries[i * dim + i] = 1.0;
        }
        Self { dim, entries }
    }

    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn get(&self, i: usize, j: usize) -> f64 {
        self.entries[i * self.dim + j]
    }

    /// Row-major entries.
    pub fn as_slice(&self) -> &[f64] {
        &self.entries
    }

    pub fn rows(&self) -> Vec<Vec<f64>> {
        self.entries
            .chunks(self.dim.max(1))
            .map(|r| r.to_vec())
            .collect()
    }

    fn violations(&self) -> Vec<Violation> {
        let n = self.dim;
        let mut out = Vec::new();
        if self.entries.iter().any(|x| !x.is_finite()) {
            out.push(Violation::NonFinite("correlation".into()));
            return out;
        }
        for i in 0..n {
            if (self.get(i, i) - 1.0).abs() > SYMMETRY_TOLERANCE {
                out.push(Violation::CorrelationDiagonal {
                    index: i,
                    value: self.get(i, i),
                });
            }
            for j in (i + 1)..n {
                let (x, y) = (self.get(i, j), self.get(j, i));
                if (x - y).abs() > SYMMETRY_TOLERANCE {
                    out.push(Violation::CorrelationNotSymmetric { i, j });
                }
                if !(-1.0..=1.0).contains(&x) {
                    out.push(Violation::CorrelationOutOfRange { i, j, value: x });
                }
            }
        }
        if out.is_empty() {
            if let Err(Error::NotPositiveSemiDefinite(pivot)) =
                cholesky_psd(&self.entries, n, PSD_TOLERANCE)
            {
                out.push(Violation::CorrelationNotPsd { pivot });
            }
        }
        out
    }
}

/// Weighted basket `Z_t = Σ α_j I_t^j` with `α_j = ω_j / I_0^j`.
///
/// The ratios are frozen when the basket is built: later spot bumps move
/// the basket level, not the contract.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct BasketSpec {
    indices: Vec<IndexSpec>,
    weights: Vec<f64>,
    alphas: Vec<f64>,
    strike: f64,
}

/// Builds a basket whose level starts at the sum of the weights.
pub fn build_basket(indices: Vec<IndexSpec>, weights: Vec<f64>) -> Result<BasketSpec> {
    if indices.is_empty() {
        return Err(Error::InvalidInput(
            "basket needs at least one index".into(),
        ));
    }
    if indices.len() != weights.len() {
        return Err(Error::DimensionMismatch(format!(
            "{} indices but {} weights",
            indices.len(),
            weights.len()
        )));
    }
    for (j, (index, &w)) in indices.iter().zip(&weights).enumerate() {
        if !(w.is_finite() && w > 0.0) {
            return Err(Error::InvalidInput(format!(
                "weight {j} must be positive, got {w}"
            )));
        }
        if !(index.spot.is_finite() && index.spot > 0.0) {
            return Err(Error::InvalidInput(format!(
                "spot of index {j} ({}) must be positive, got {}",
                index.name, index.spot
            )));
        }
    }
    let alphas = indices
        .iter()
        .zip(&weights)
        .map(|(ix, w)| w / ix.spot)
        .collect();
    let strike = weights.iter().sum();
    Ok(BasketSpec {
        indices,
        weights,
        alphas,
        strike,
    })
}

impl BasketSpec {
    pub fn indices(&self) -> &[IndexSpec] {
        &self.indices
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn alphas(&self) -> &[f64] {
        &self.alphas
    }

    /// `X = Σ ω_j`, the basket level at inception.
    pub fn strike(&self) -> f64 {
        self.strike
    }

    pub fn len(&self) -> usize {
        self.indices.len()
    }

    pub fn is_empty(&self) -> bool {
        self.indices.is_empty()
    }

    /// Same contract, index `j` moved to a new spot.
    pub fn with_spot(&self, j: usize, spot: f64) -> Self {
        let mut out = self.clone();
        out.indices[j].spot = spot;
        out
    }

    pub fn with_vol(&self, j: usize, vol: f64) -> Self {
        let mut out = self.clone();
        out.indices[j].vol = vol;
        out
    }

    /// Relative shift of every volatility: `σ ← σ·(1 + shift/100)`.
    pub fn with_vol_shift(&self, shift_percent: f64) -> Self {
        let mut out = self.clone();
        for ix in &mut out.indices {
            ix.vol *= 1.0 + shift_percent / 100.0;
        }
        out
    }

    /// Current level `Σ α_j I_0^j`.
    pub fn level(&self) -> f64 {
        self.alphas
            .iter()
            .zip(&self.indices)
            .map(|(a, ix)| a * ix.spot)
            .sum()
    }
}

/// Averaging dates as year fractions from the valuation date.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ObservationSchedule {
    times: Vec<f64>,
    maturity: f64,
}

impl ObservationSchedule {
    pub fn new(times: Vec<f64>, maturity: f64) -> Self {
        Self { times, maturity }
    }

    /// Schedule whose only observation is the maturity.
    pub fn terminal(maturity: f64) -> Self {
        Self::new(vec![maturity], maturity)
    }

    pub fn times(&self) -> &[f64] {
        &self.times
    }

    pub fn maturity(&self) -> f64 {
        self.maturity
    }

    pub fn len(&self) -> usize {
        self.times.len()
    }

    pub fn is_empty(&self) -> bool {
        self.times.is_empty()
    }

    fn violations(&self) -> Vec<Violation> {
        let mut out = Vec::new();
        if self.times.is_empty() {
            out.push(Violation::EmptySchedule);
            return out;
        }
        if self.times.iter().any(|t| !t.is_finite()) || !self.maturity.is_finite() {
            out.push(Violation::NonFinite("observation schedule".into()));
            return out;
        }
        if self.times[0] <= 0.0 {
            out.push(Violation::NonPositiveTime(self.times[0]));
        }
        for (k, w) in self.times.windows(2).enumerate() {
            if w[1] <= w[0] {
                out.push(Violation::TimesNotIncreasing { position: k + 1 });
            }
        }
        let last = *self.times.last().unwrap();
        if last > self.maturity {
            out.push(Violation::MaturityBeforeObservation {
                maturity: self.maturity,
                last,
            });
        }
        out
    }
}

/// Continuously compounded flat rate.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct DiscountSpec {
    pub rate: f64,
}

impl DiscountSpec {
    pub fn new(rate: f64) -> Self {
        Self { rate }
    }

    pub fn factor(&self, t: f64) -> f64 {
        (-self.rate * t).exp()
    }
}

/// Amount paid to the security holder at maturity regardless of the basket.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct GuaranteeSpec {
    guaranteed_amount: f64,
}

impl GuaranteeSpec {
    pub fn new(guaranteed_amount: f64) -> Result<Self> {
        if !(guaranteed_amount.is_finite() && guaranteed_amount >= 0.0) {
            return Err(Error::InvalidInput(format!(
                "guaranteed amount must be nonnegative, got {guaranteed_amount}"
            )));
        }
        Ok(Self { guaranteed_amount })
    }

    pub fn amount(&self) -> f64 {
        self.guaranteed_amount
    }
}

/// Segregated fund with a 100% maturity guarantee on the principal.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SegFundSpec {
    pub principal: f64,
    /// Fraction of the principal initially put into each index.
    pub allocations: Vec<f64>,
    pub fee_times: Vec<f64>,
    pub mgmt_fees: Vec<f64>,
    pub protection_fees: Vec<f64>,
}

impl SegFundSpec {
    /// Fund with no fees.
    pub fn new(principal: f64, allocations: Vec<f64>) -> Self {
        Self {
            principal,
            allocations,
            fee_times: Vec::new(),
            mgmt_fees: Vec::new(),
            protection_fees: Vec::new(),
        }
    }

    pub fn with_fees(mut self, times: Vec<f64>, mgmt: Vec<f64>, protection: Vec<f64>) -> Self {
        self.fee_times = times;
        self.mgmt_fees = mgmt;
        self.protection_fees = protection;
        self
    }

    /// Units bought at outset: `u_i = v_i P / I_0^i`.
    pub fn units(&self, indices: &[IndexSpec]) -> Vec<f64> {
        self.allocations
            .iter()
            .zip(indices)
            .map(|(v, ix)| v * self.principal / ix.spot)
            .collect()
    }

    /// Fraction of units left after every fee deduction.
    pub fn fee_survival(&self) -> f64 {
        self.mgmt_fees
            .iter()
            .zip(&self.protection_fees)
            .map(|(m, p)| 1.0 - (m + p))
            .product()
    }

    /// Units held at maturity, `ω_i = u_i Π_j (1 - (m_j + p_j))`.
    pub fn terminal_weights(&self, indices: &[IndexSpec]) -> Vec<f64> {
        let survival = self.fee_survival();
        self.units(indices)
            .into_iter()
            .map(|u| u * survival)
            .collect()
    }

    pub fn violations(&self, n_indices: usize, maturity: f64) -> Vec<Violation> {
        let mut out = Vec::new();
        if !(self.principal.is_finite() && self.principal > 0.0) {
            out.push(Violation::Fund(format!(
                "principal must be positive, got {}",
                self.principal
            )));
        }
        if self.allocations.len() != n_indices {
            out.push(Violation::Fund(format!(
                "{} allocations for {n_indices} indices",
                self.allocations.len()
            )));
        }
        if self
            .allocations
            .iter()
            .any(|v| !(v.is_finite() && *v >= 0.0))
        {
            out.push(Violation::Fund("allocations must be nonnegative".into()));
        }
        let total: f64 = self.allocations.iter().sum();
        if (total - 1.0).abs() > ALLOCATION_TOLERANCE {
            out.push(Violation::Fund(format!(
                "allocations sum to {total}, expected 1"
            )));
        }
        let n_fees = self.fee_times.len();
        if self.mgmt_fees.len() != n_fees || self.protection_fees.len() != n_fees {
            out.push(Violation::Fund(format!(
                "{n_fees} fee times but {} management and {} protection fees",
                self.mgmt_fees.len(),
                self.protection_fees.len()
            )));
            return out;
        }
        if let Some(&t) = self.fee_times.first() {
            if !(t > 0.0) {
                out.push(Violation::Fund("fee times must be positive".into()));
            }
        }
        if self.fee_times.windows(2).any(|w| !(w[1] > w[0])) {
            out.push(Violation::Fund("fee times not increasing".into()));
        }
        if let Some(&t) = self.fee_times.last() {
            if !(t < maturity) {
                out.push(Violation::Fund(format!(
                    "last fee time {t} is not before maturity {maturity}"
                )));
            }
        }
        for (j, (m, p)) in self.mgmt_fees.iter().zip(&self.protection_fees).enumerate() {
            if !((0.0..1.0).contains(m) && (0.0..1.0).contains(p) && m + p < 1.0) {
                out.push(Violation::Fund(format!(
                    "fees at date {j} must lie in [0, 1) with sum below 1, got {m} and {p}"
                )));
            }
        }
        out
    }
}

/// A problem found by [`validate_market`].
#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum Violation {
    NonFinite(String),
    NegativeVol { index: usize, vol: f64 },
    IndexCountMismatch { indices: usize, correlation: usize },
    CorrelationDiagonal { index: usize, value: f64 },
    CorrelationNotSymmetric { i: usize, j: usize },
    CorrelationOutOfRange { i: usize, j: usize, value: f64 },
    CorrelationNotPsd { pivot: f64 },
    EmptySchedule,
    NonPositiveTime(f64),
    TimesNotIncreasing { position: usize },
    MaturityBeforeObservation { maturity: f64, last: f64 },
    Fund(String),
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Self::NonFinite(what) => write!(f, "non-finite value in {what}"),
            Self::NegativeVol { index, vol } => {
                write!(f, "negative volatility {vol} for index {index}")
            }
            Self::IndexCountMismatch {
                indices,
                correlation,
            } => write!(
                f,
                "correlation matrix is {correlation}x{correlation} but basket has {indices} indices"
            ),
            Self::CorrelationDiagonal { index, value } => {
                write!(
                    f,
                    "correlation diagonal ({index},{index}) is {value}, expected 1"
                )
            }
            Self::CorrelationNotSymmetric { i, j } => {
                write!(f, "correlation not symmetric at ({i},{j})")
            }
            Self::CorrelationOutOfRange { i, j, value } => {
                write!(f, "correlation out of range at ({i},{j}): {value}")
            }
            Self::CorrelationNotPsd { pivot } => {
                write!(
                    f,
                    "correlation not positive semi-definite (pivot {pivot:e})"
                )
            }
            Self::EmptySchedule => write!(f, "observation schedule is empty"),
            Self::NonPositiveTime(t) => write!(f, "observation time {t} is not positive"),
            Self::TimesNotIncreasing { position } => {
                write!(f, "times not increasing at position {position}")
            }
            Self::MaturityBeforeObservation { maturity, last } => {
                write!(f, "maturity {maturity} precedes last observation {last}")
            }
            Self::Fund(msg) => write!(f, "segregated fund: {msg}"),
        }
    }
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }

    pub fn into_result(self) -> Result<()> {
        if self.is_ok() {
            Ok(())
        } else {
            Err(Error::InvalidMarket(self.violations))
        }
    }
}

fn index_violations(indices: &[IndexSpec], rate: f64) -> Vec<Violation> {
    let mut out = Vec::new();
    for (j, ix) in indices.iter().enumerate() {
        let finite = ix.spot.is_finite()
            && ix.vol.is_finite()
            && ix.div_yield.is_finite()
            && ix.drift_override.is_none_or(f64::is_finite);
        if !finite {
            out.push(Violation::NonFinite(format!("index {j} ({})", ix.name)));
        } else if ix.vol < 0.0 {
            out.push(Violation::NegativeVol {
                index: j,
                vol: ix.vol,
            });
        }
    }
    if !rate.is_finite() {
        out.push(Violation::NonFinite("discount rate".into()));
    }
    out
}

fn correlation_violations(n_indices: usize, corr: &CorrelationMatrix) -> Vec<Violation> {
    if corr.dim() != n_indices {
        return vec![Violation::IndexCountMismatch {
            indices: n_indices,
            correlation: corr.dim(),
        }];
    }
    corr.violations()
}

/// Checks every input a pricing call depends on. Never fails; an empty
/// report means the data is usable.
pub fn validate_market(
    basket: &BasketSpec,
    correlations: &CorrelationMatrix,
    schedule: &ObservationSchedule,
    discount: &DiscountSpec,
) -> ValidationReport {
    let mut violations = index_violations(basket.indices(), discount.rate);
    violations.extend(correlation_violations(basket.len(), correlations));
    violations.extend(schedule.violations());
    ValidationReport { violations }
}

/// Checks the inputs of a segregated-fund valuation.
pub fn validate_fund(
    fund: &SegFundSpec,
    indices: &[IndexSpec],
    correlations: &CorrelationMatrix,
    discount: &DiscountSpec,
    maturity: f64,
) -> ValidationReport {
    let mut violations = index_violations(indices, discount.rate);
    if indices.iter().any(|ix| !(ix.spot > 0.0)) {
        violations.push(Violation::Fund("index spots must be positive".into()));
    }
    violations.extend(correlation_violations(indices.len(), correlations));
    if !(maturity.is_finite() && maturity > 0.0) {
        violations.push(Violation::NonPositiveTime(maturity));
    }
    violations.extend(fund.violations(indices.len(), maturity));
    ValidationReport { violations }
}

/// A validated Asian-option pricing problem.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Market {
    basket: BasketSpec,
    correlation: CorrelationMatrix,
    schedule: ObservationSchedule,
    discount: DiscountSpec,
}

impl Market {
    pub fn new(
        basket: BasketSpec,
        correlation: CorrelationMatrix,
        schedule: ObservationSchedule,
        discount: DiscountSpec,
    ) -> Result<Self> {
        validate_market(&basket, &correlation, &schedule, &discount).into_result()?;
        Ok(Self {
            basket,
            correlation,
            schedule,
            discount,
        })
    }

    pub fn basket(&self) -> &BasketSpec {
        &self.basket
    }

    pub fn correlation(&self) -> &CorrelationMatrix {
        &self.correlation
    }

    pub fn schedule(&self) -> &ObservationSchedule {
        &self.schedule
    }

    pub fn discount(&self) -> &DiscountSpec {
        &self.discount
    }

    pub fn maturity(&self) -> f64 {
        self.schedule.maturity()
    }

    pub fn discount_factor(&self) -> f64 {
        self.discount.factor(self.maturity())
    }

    pub fn drifts(&self) -> Vec<f64> {
        let r = self.discount.rate;
        self.basket.indices().iter().map(|ix| ix.drift(r)).collect()
    }

    pub fn vols(&self) -> Vec<f64> {
        self.basket.indices().iter().map(|ix| ix.vol).collect()
    }

    pub fn spots(&self) -> Vec<f64> {
        self.basket.indices().iter().map(|ix| ix.spot).collect()
    }

    /// Replaces the basket, re-running validation.
    pub fn with_basket(&self, basket: BasketSpec) -> Result<Self> {
        Self::new(
            basket,
            self.correlation.clone(),
            self.schedule.clone(),
            self.discount,
        )
    }

    pub fn with_vol_shift(&self, shift_percent: f64) -> Result<Self> {
        self.with_basket(self.basket.with_vol_shift(shift_percent))
    }

    pub fn with_rate(&self, rate: f64) -> Result<Self> {
        Self::new(
            self.basket.clone(),
            self.correlation.clone(),
            self.schedule.clone(),
            DiscountSpec::new(rate),
        )
    }
}

const DAYS_PER_YEAR: f64 = 365.0;

pub fn parse_date(s: &str) -> Result<NaiveDate> {
    NaiveDate::parse_from_str(s.trim(), "%Y-%m-%d").map_err(|e| Error::Date(format!("{s:?}: {e}")))
}

/// ACT/365 fixed year fraction.
pub fn year_fraction(from: NaiveDate, to: NaiveDate) -> f64 {
    (to - from).num_days() as f64 / DAYS_PER_YEAR
}

/// Converts ISO dates (`YYYY-MM-DD`) into an observation schedule measured
/// from the valuation date.
pub fn build_schedule_from_dates<S: AsRef<str>>(
    valuation_date: &str,
    dates: &[S],
    maturity_date: &str,
) -> Result<ObservationSchedule> {
    let valuation = parse_date(valuation_date)?;
    let maturity = parse_date(maturity_date)?;
    let mut times = Vec::with_capacity(dates.len());
    for d in dates {
        let date = parse_date(d.as_ref())?;
        if date <= valuation {
            return Err(Error::Date(format!(
                "observation {date} is not after valuation date {valuation}"
            )));
        }
        times.push(year_fraction(valuation, date));
    }
    if maturity <= valuation {
        return Err(Error::Date(format!(
            "maturity {maturity} is not after valuation date {valuation}"
        )));
    }
    Ok(ObservationSchedule::new(
        times,
        year_fraction(valuation, maturity),
    ))
}
