//! Valuation of equity-linked securities with a guaranteed return.
//!
//! The security pays a guaranteed amount plus an Asian-style call on the
//! discretely averaged level of a weighted basket of equity indices. The
//! embedded option is priced by replacing the average with a shifted
//! lognormal variable `a + exp(b + c·ε)` whose first three moments match
//! those of the average. The crate also provides:
//!
//! - the two-moment lognormal (Levy) baseline,
//! - analytic deltas and vegas by chain rule through the moment fit,
//! - a correlated-GBM Monte Carlo engine used as the benchmark,
//! - segregated-fund maturity guarantees valued as basket puts.
//!
//! ```
//! use els_core::market_model::{build_basket, CorrelationMatrix, DiscountSpec, IndexSpec, Market, ObservationSchedule};
//! use els_core::pricer::asian_call_price;
//!
//! let basket = build_basket(
//!     vec![IndexSpec::new("A", 100.0, 0.2), IndexSpec::new("B", 50.0, 0.3)],
//!     vec![60.0, 40.0],
//! )
//! .unwrap();
//! let market = Market::new(
//!     basket,
//!     CorrelationMatrix::uniform(2, 0.5),
//!     ObservationSchedule::new(vec![0.5, 1.0], 1.0),
//!     DiscountSpec::new(0.03),
//! )
//! .unwrap();
//! let price = asian_call_price(&market).unwrap();
//! assert!(price.value > 0.0);
//! ```

// `!(x > 0.0)` is used on purpose so that NaN fails validation
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod benchmark;
pub mod error;
pub mod greeks;
pub mod market_model;
pub mod moment_match;
pub mod moments;
pub mod montecarlo;
pub mod normal;
pub mod pricer;
mod sum;

pub use error::{Error, Result};
