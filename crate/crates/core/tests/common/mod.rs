#![allow(dead_code)]

use els_core::market_model::{
    build_basket, CorrelationMatrix, DiscountSpec, IndexSpec, Market, ObservationSchedule,
};
use els_core::normal::cdf;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// Black-Scholes call with continuous yield.
pub fn black_scholes_call(spot: f64, strike: f64, vol: f64, rate: f64, div: f64, t: f64) -> f64 {
    let sd = vol * t.sqrt();
    let d1 = ((spot / strike).ln() + (rate - div + 0.5 * vol * vol) * t) / sd;
    let d2 = d1 - sd;
    spot * (-div * t).exp() * cdf(d1) - strike * (-rate * t).exp() * cdf(d2)
}

pub fn rel_err(x: f64, reference: f64) -> f64 {
    ((x - reference) / reference).abs()
}

/// Single index, single observation: the average is exactly lognormal.
pub fn lognormal_market(spot: f64, strike: f64, vol: f64, rate: f64, t: f64) -> Market {
    // built at spot = strike so α = 1, then moved to the actual spot
    let basket = build_basket(vec![IndexSpec::new("x", strike, vol)], vec![strike])
        .unwrap()
        .with_spot(0, spot);
    Market::new(
        basket,
        CorrelationMatrix::identity(1),
        ObservationSchedule::terminal(t),
        DiscountSpec::new(rate),
    )
    .unwrap()
}

/// Correlation matrix with nonnegative entries from normalized positive
/// factor loadings.
pub fn random_correlation(rng: &mut impl Rng, m: usize) -> CorrelationMatrix {
    let k = 3;
    let rows: Vec<Vec<f64>> = (0..m)
        .map(|_| {
            let v: Vec<f64> = (0..k).map(|_| rng.random_range(0.05..1.0)).collect();
            let norm = v.iter().map(|x| x * x).sum::<f64>().sqrt();
            v.into_iter().map(|x| x / norm).collect()
        })
        .collect();
    let corr: Vec<Vec<f64>> = (0..m)
        .map(|i| {
            (0..m)
                .map(|j| {
                    if i == j {
                        1.0
                    } else {
                        rows[i].iter().zip(&rows[j]).map(|(a, b)| a * b).sum()
                    }
                })
                .collect()
        })
        .collect();
    CorrelationMatrix::from_rows(&corr).unwrap()
}

pub struct MarketShape {
    pub max_assets: usize,
    pub max_times: usize,
    pub vol_range: (f64, f64),
}

impl Default for MarketShape {
    fn default() -> Self {
        Self {
            max_assets: 4,
            max_times: 6,
            vol_range: (0.05, 0.5),
        }
    }
}

pub fn random_market(rng: &mut impl Rng, shape: &MarketShape) -> Market {
    let m = rng.random_range(1..=shape.max_assets);
    let n = rng.random_range(1..=shape.max_times);
    let indices = (0..m)
        .map(|j| {
            IndexSpec::new(
                format!("{j}"),
                rng.random_range(20.0..200.0),
                rng.random_range(shape.vol_range.0..shape.vol_range.1),
            )
            .with_div_yield(rng.random_range(0.0..0.03))
        })
        .collect();
    let weights = (0..m).map(|_| rng.random_range(1.0..50.0)).collect();
    let mut times: Vec<f64> = (0..n).map(|_| rng.random_range(0.1..5.0)).collect();
    times.sort_by(|a, b| a.partial_cmp(b).unwrap());
    times.dedup();
    let maturity = times.last().unwrap() + rng.random_range(0.0..0.2);
    let basket = build_basket(indices, weights).unwrap();
    // move spots away from inception so options are not all at the money
    let basket = (0..m).fold(basket, |b, j| {
        let s = b.indices()[j].spot * rng.random_range(0.8..1.25);
        b.with_spot(j, s)
    });
    Market::new(
        basket,
        random_correlation(rng, m),
        ObservationSchedule::new(times, maturity),
        DiscountSpec::new(rng.random_range(0.0..0.06)),
    )
    .unwrap()
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

/// Solves the shifted-lognormal matching system by bisection on `c` from
/// the skewness equation `(e^{c²} + 2) √(e^{c²} - 1) = η`.
pub fn bisection_fit(m1: f64, mu2: f64, mu3: f64) -> (f64, f64, f64) {
    let eta = mu3 / mu2.powf(1.5);
    let skew = |c: f64| {
        let w = (c * c).exp();
        (w + 2.0) * (w - 1.0).sqrt()
    };
    let (mut lo, mut hi) = (1e-12, 1.0);
    while skew(hi) < eta {
        hi *= 2.0;
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if skew(mid) < eta {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    let c = 0.5 * (lo + hi);
    let w = (c * c).exp();
    let scale = (mu2 / (w - 1.0)).sqrt();
    (m1 - scale, scale.ln() - 0.5 * c * c, c)
}
