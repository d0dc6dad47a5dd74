mod common;

use common::{black_scholes_call, lognormal_market, random_market, rel_err, rng, MarketShape};
use els_core::benchmark::{reference_market, VOL_SHIFTS};
use els_core::market_model::{
    build_basket, CorrelationMatrix, DiscountSpec, GuaranteeSpec, IndexSpec, Market,
    ObservationSchedule, SegFundSpec,
};
use els_core::moment_match::ShiftedLognormalFit;
use els_core::montecarlo::{
    mc_asian_call, mc_floored_return, mc_security_value, mc_segfund_put, McConfig,
};
use els_core::pricer::{
    asian_call_price, floored_return_value, levy_call_price, security_value, segfund_put_price,
    shifted_lognormal_call, shifted_lognormal_put, Branch, LevyTarget,
};
use proptest::prelude::*;

const GRID_VOLS: [f64; 5] = [0.1, 0.2, 0.3, 0.4, 0.5];
const GRID_TENORS: [f64; 5] = [0.5, 1.0, 2.0, 3.0, 5.0];
const GRID_MONEYNESS: [f64; 5] = [0.8, 0.9, 1.0, 1.1, 1.2];

#[test]
fn single_observation_collapses_to_black_scholes() {
    let (strike, rate) = (100.0, 0.05);
    for vol in GRID_VOLS {
        for t in GRID_TENORS {
            for m in GRID_MONEYNESS {
                let mk = lognormal_market(strike * m, strike, vol, rate, t);
                let p = asian_call_price(&mk).unwrap();
                let bs = black_scholes_call(strike * m, strike, vol, rate, 0.0, t);
                assert!(
                    rel_err(p.value, bs) <= 1e-9,
                    "σ={vol} T={t} m={m}: {} vs {bs}",
                    p.value
                );
                let fit = p.shifted_fit().unwrap();
                assert!(fit.a.abs() <= 1e-7, "a = {}", fit.a);
                let levy = levy_call_price(&mk, LevyTarget::Average).unwrap();
                assert!(rel_err(levy.value, p.value) <= 1e-9);
            }
        }
    }
}

#[test]
fn black_scholes_spot_example() {
    let mk = lognormal_market(100.0, 100.0, 0.2, 0.05, 1.0);
    let p = asian_call_price(&mk).unwrap();
    // 10.450583572185565 from an independent double-precision evaluation
    assert!(
        rel_err(p.value, 10.450_583_572_185_565) <= 1e-9,
        "{}",
        p.value
    );
}

#[test]
fn levy_targets_agree_on_terminal_schedule() {
    let mk = lognormal_market(90.0, 100.0, 0.3, 0.02, 2.0);
    let avg = levy_call_price(&mk, LevyTarget::Average).unwrap();
    let term = levy_call_price(&mk, LevyTarget::TerminalBasket).unwrap();
    assert!(rel_err(avg.value, term.value) <= 1e-12);
}

fn pinned_market(rate: f64) -> Market {
    let indices = vec![
        IndexSpec::new("a", 100.0, 0.2).with_drift(0.03),
        IndexSpec::new("b", 50.0, 0.35).with_drift(0.01),
        IndexSpec::new("c", 10.0, 0.15).with_drift(0.05),
    ];
    Market::new(
        build_basket(indices, vec![30.0, 50.0, 20.0]).unwrap(),
        CorrelationMatrix::uniform(3, 0.3),
        ObservationSchedule::new(vec![1.0, 2.0, 3.0, 4.0], 4.5),
        DiscountSpec::new(rate),
    )
    .unwrap()
}

#[test]
fn rate_change_with_pinned_drifts_only_discounts() {
    let base = asian_call_price(&pinned_market(0.01)).unwrap();
    for r in [0.0, 0.03, 0.08] {
        let moved = asian_call_price(&pinned_market(r)).unwrap();
        let expected = (-(r - 0.01) * 4.5f64).exp();
        assert!(rel_err(moved.value / base.value, expected) <= 1e-13);
    }
}

#[test]
fn zero_vol_flat_basket_is_worthless() {
    let indices = vec![
        IndexSpec::new("a", 100.0, 0.0).with_drift(0.0),
        IndexSpec::new("b", 70.0, 0.0).with_drift(0.0),
    ];
    let mk = Market::new(
        build_basket(indices, vec![60.0, 40.0]).unwrap(),
        CorrelationMatrix::identity(2),
        ObservationSchedule::new(vec![1.0, 2.0], 2.0),
        DiscountSpec::new(0.04),
    )
    .unwrap();
    let p = asian_call_price(&mk).unwrap();
    assert_eq!(p.value, 0.0);
    assert_eq!(p.branch, Branch::Degenerate);
    assert_eq!(
        levy_call_price(&mk, LevyTarget::Average).unwrap().value,
        0.0
    );
    let sec = security_value(&GuaranteeSpec::new(100.0).unwrap(), &mk).unwrap();
    assert!(rel_err(sec.value, 100.0 * (-0.08f64).exp()) <= 1e-15);
}

#[test]
fn shift_above_strike_prices_at_forward_intrinsic() {
    let fit = ShiftedLognormalFit::new(120.0, 1.5, 0.4);
    let m1 = fit.raw_moments()[0];
    let df = 0.93;
    for strike in [50.0, 100.0, 120.0] {
        let (v, branch) = shifted_lognormal_call(&fit, strike, df);
        assert_eq!(branch, Branch::ShiftDominates);
        assert_eq!(v, df * (fit.a - strike + fit.scale()));
        assert!(rel_err(v, df * (m1 - strike)) <= 1e-15);
        assert_eq!(shifted_lognormal_put(&fit, strike, df).0, 0.0);
    }
}

#[test]
fn branch_continuity_at_the_shift() {
    for (a, b, c) in [(80.0, 2.0, 0.3), (5.0, -1.0, 0.9), (300.0, 3.0, 0.05)] {
        let fit = ShiftedLognormalFit::new(a, b, c);
        let above = a * (1.0 + 1e-7);
        let (v, branch) = shifted_lognormal_call(&fit, above, 1.0);
        assert_eq!(branch, Branch::Integral);
        let continued = a - above + fit.scale();
        assert!((v - continued).abs() <= 1e-8, "{v} vs {continued}");
        let below = a * (1.0 - 1e-7);
        let (w, branch) = shifted_lognormal_call(&fit, below, 1.0);
        assert_eq!(branch, Branch::ShiftDominates);
        assert!((w - (a - below + fit.scale())).abs() <= 1e-12);
    }
}

#[test]
fn price_rises_across_vol_shifts() {
    let mk = reference_market();
    let prices: Vec<f64> = VOL_SHIFTS
        .iter()
        .map(|&s| {
            asian_call_price(&mk.with_vol_shift(s).unwrap())
                .unwrap()
                .value
        })
        .collect();
    assert!(prices.windows(2).all(|w| w[1] >= w[0]), "{prices:?}");
}

#[test]
fn levy_error_exceeds_model_error_at_high_vol() {
    let mk = reference_market().with_vol_shift(100.0).unwrap();
    let mc = mc_asian_call(&mk, &McConfig::new(1_000_000, 42)).unwrap();
    let model = asian_call_price(&mk).unwrap().value;
    let levy = levy_call_price(&mk, LevyTarget::Average).unwrap().value;
    assert!(
        (levy - mc.mean).abs() > (model - mc.mean).abs(),
        "levy {levy} model {model} mc {}",
        mc.mean
    );
    assert!(rel_err(model, mc.mean) <= 0.015);
}

#[test]
fn security_value_matches_undecomposed_payoff() {
    let mk = reference_market();
    let g = GuaranteeSpec::new(100.0).unwrap();
    let v = security_value(&g, &mk).unwrap().value;
    let mc = mc_security_value(&g, &mk, &McConfig::new(1_000_000, 5)).unwrap();
    assert!(
        mc.z_score(v) <= 3.0,
        "{v} vs {} ± {}",
        mc.mean,
        mc.std_error
    );
    let zero = security_value(&GuaranteeSpec::new(0.0).unwrap(), &mk)
        .unwrap()
        .value;
    assert_eq!(zero, asian_call_price(&mk).unwrap().value);
}

fn fund_indices(vol_a: f64, vol_b: f64) -> Vec<IndexSpec> {
    vec![
        IndexSpec::new("equity", 250.0, vol_a).with_div_yield(0.015),
        IndexSpec::new("balanced", 80.0, vol_b).with_div_yield(0.005),
    ]
}

fn yearly_fees(years: usize, mgmt: f64, prot: f64) -> SegFundSpec {
    SegFundSpec::new(1000.0, vec![0.6, 0.4]).with_fees(
        (1..=years).map(|y| y as f64).collect(),
        vec![mgmt; years],
        vec![prot; years],
    )
}

#[test]
fn zero_vol_fund_shortfall_is_exact() {
    let indices = vec![
        IndexSpec::new("a", 250.0, 0.0).with_div_yield(0.06),
        IndexSpec::new("b", 80.0, 0.0).with_div_yield(0.04),
    ];
    let (rate, t) = (0.02, 10.0);
    let fund = SegFundSpec::new(1000.0, vec![0.6, 0.4]);
    let p = segfund_put_price(
        &fund,
        &indices,
        &CorrelationMatrix::identity(2),
        &DiscountSpec::new(rate),
        t,
    )
    .unwrap();
    let forward: f64 = fund
        .units(&indices)
        .iter()
        .zip(&indices)
        .map(|(u, ix)| u * ix.spot * (ix.drift(rate) * t).exp())
        .sum();
    assert!(forward < 1000.0);
    let expected = (-rate * t).exp() * (1000.0 - forward);
    assert!(
        (p.value - expected).abs() <= 1e-12 * expected,
        "{} vs {expected}",
        p.value
    );
}

#[test]
fn fund_put_matches_simulation() {
    let indices = fund_indices(0.22, 0.1);
    let corr = CorrelationMatrix::uniform(2, 0.4);
    let discount = DiscountSpec::new(0.025);
    let t = 10.0;
    let fund = yearly_fees(9, 0.01, 0.002);
    let p = segfund_put_price(&fund, &indices, &corr, &discount, t).unwrap();
    let mc = mc_segfund_put(
        &fund,
        &indices,
        &corr,
        &discount,
        t,
        &McConfig::new(1_000_000, 77),
    )
    .unwrap();
    assert!(
        mc.z_score(p.value) <= 3.0,
        "{} vs {} ± {}",
        p.value,
        mc.mean,
        mc.std_error
    );
}

#[test]
fn fund_put_nondecreasing_in_fees() {
    let indices = fund_indices(0.2, 0.12);
    let corr = CorrelationMatrix::uniform(2, 0.3);
    let discount = DiscountSpec::new(0.03);
    let grid = [0.0, 0.005, 0.01, 0.02, 0.04];
    let price = |m: f64, p: f64| {
        segfund_put_price(&yearly_fees(9, m, p), &indices, &corr, &discount, 10.0)
            .unwrap()
            .value
    };
    for &m in &grid {
        let row: Vec<f64> = grid.iter().map(|&p| price(m, p)).collect();
        assert!(row.windows(2).all(|w| w[1] >= w[0]), "mgmt {m}: {row:?}");
    }
    for &p in &grid {
        let col: Vec<f64> = grid.iter().map(|&m| price(m, p)).collect();
        assert!(
            col.windows(2).all(|w| w[1] >= w[0]),
            "protection {p}: {col:?}"
        );
    }
}

#[test]
fn floored_strip_matches_simulation() {
    for m in [1usize, 2, 12] {
        let times: Vec<f64> = (0..=m).map(|i| 0.25 + i as f64 / m as f64).collect();
        for r in [0.0, 0.05] {
            for q in [0.0, 0.03] {
                let v = floored_return_value(&times, r, q, -1.0).unwrap();
                if r == q {
                    assert_eq!(v, 0.0);
                }
                let mc = mc_floored_return(&times, r, q, 0.2, -1.0, &McConfig::new(200_000, 11))
                    .unwrap();
                assert!(
                    mc.z_score(v) <= 3.0,
                    "M={m} r={r} q={q}: {v} vs {} ± {}",
                    mc.mean,
                    mc.std_error
                );
            }
        }
    }
}

#[test]
fn floored_strip_examples() {
    let one = floored_return_value(&[0.0, 1.0], 0.05, 0.0, -1.0).unwrap();
    assert!(rel_err(one, (-0.05f64).exp() * 0.05f64.exp_m1()) <= 1e-15);
    let two = floored_return_value(&[0.0, 1.0, 2.0], 0.05, 0.0, -1.5).unwrap();
    assert!(rel_err(two, (-0.1f64).exp() * 2.0 * 0.05f64.exp_m1()) <= 1e-15);
    assert!(floored_return_value(&[0.0, 1.0], 0.05, 0.0, -0.5).is_err());
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(200))]

    #[test]
    fn parity_under_the_fitted_model(seed in any::<u64>()) {
        let mk = random_market(&mut rng(seed), &MarketShape::default());
        let p = asian_call_price(&mk).unwrap();
        let fit = p.shifted_fit().unwrap();
        let (call, _) = shifted_lognormal_call(fit, p.strike, p.discount_factor);
        prop_assert_eq!(call, p.value);
        let (put, _) = shifted_lognormal_put(fit, p.strike, p.discount_factor);
        let forward = p.discount_factor * (p.moments.m1 - p.strike);
        prop_assert!((call - put - forward).abs() <= 1e-10 * p.moments.m1.max(1.0),
            "call {call} put {put} forward {forward}");
    }

    #[test]
    fn prices_are_nonnegative_and_bounded(seed in any::<u64>()) {
        let mk = random_market(&mut rng(seed), &MarketShape::default());
        let p = asian_call_price(&mk).unwrap();
        let levy = levy_call_price(&mk, LevyTarget::Average).unwrap();
        let intrinsic = p.discount_factor * (p.moments.m1 - p.strike).max(0.0);
        for v in [p.value, levy.value] {
            prop_assert!(v >= intrinsic - 1e-9 * p.moments.m1);
            prop_assert!(v <= p.discount_factor * p.moments.m1);
        }
    }
}
