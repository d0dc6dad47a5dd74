//! A fully specified five-index reference instrument.
//!
//! Spots, weights and observation dates follow a published five-index
//! equity-linked note (issued 2018-07-23, maturing 2023-07-23, valued on
//! 2019-06-02). That term sheet lists no volatilities, correlations or
//! rates; the values below were chosen for this crate and checked against
//! the Monte Carlo engine before being frozen. They are not market data.

use crate::market_model::{
    build_basket, build_schedule_from_dates, CorrelationMatrix, DiscountSpec, IndexSpec, Market,
};

pub const SPOTS: [f64; 5] = [2421.04, 391.64, 1147.27, 15944.36, 2913.59];
pub const WEIGHTS: [f64; 5] = [25.0, 30.0, 10.0, 2.5, 2.5];
pub const VOLS: [f64; 5] = [0.15, 0.20, 0.25, 0.30, 0.18];
pub const CORRELATION: f64 = 0.5;
pub const RATE: f64 = 0.02;

pub const VALUATION_DATE: &str = "2019-06-02";
pub const MATURITY_DATE: &str = "2023-07-23";
pub const OBSERVATION_DATES: [&str; 12] = [
    "2022-08-31",
    "2022-09-30",
    "2022-10-31",
    "2022-11-30",
    "2022-12-31",
    "2023-01-31",
    "2023-02-28",
    "2023-03-31",
    "2023-04-30",
    "2023-05-31",
    "2023-06-30",
    "2023-07-22",
];

/// Volatility shifts, in percent, of the standard comparison table.
pub const VOL_SHIFTS: [f64; 4] = [-50.0, 0.0, 50.0, 100.0];

pub fn reference_market() -> Market {
    let indices = SPOTS
        .iter()
        .zip(VOLS)
        .enumerate()
        .map(|(j, (&spot, vol))| IndexSpec::new(format!("Index {}", j + 1), spot, vol))
        .collect();
    let basket = build_basket(indices, WEIGHTS.to_vec()).expect("reference basket is valid");
    let schedule = build_schedule_from_dates(VALUATION_DATE, &OBSERVATION_DATES, MATURITY_DATE)
        .expect("reference dates are valid");
    Market::new(
        basket,
        CorrelationMatrix::uniform(SPOTS.len(), CORRELATION),
        schedule,
        DiscountSpec::new(RATE),
    )
    .expect("reference market is valid")
}
