mod common;

use common::{bisection_fit, random_market, rng, MarketShape};
use els_core::moment_match::{
    fit_central, fit_lognormal, fit_lognormal_moments, fit_shifted_lognormal, skew_cubic_root,
    FitKind, ShiftedLognormalFit,
};
use els_core::moments::{asian_moments, central_from_raw};
use proptest::prelude::*;

fn rel(x: f64, y: f64) -> f64 {
    ((x - y) / y).abs()
}

/// Composite Simpson rule for `∫ e^{k c y} φ(y) dy` over `[-14, 14]`.
fn lognormal_raw_moment_by_quadrature(c: f64, k: f64) -> f64 {
    let (lo, hi, n) = (-14.0f64, 14.0f64, 20_000usize);
    let h = (hi - lo) / n as f64;
    let f = |y: f64| (k * c * y - 0.5 * y * y).exp() / (2.0 * std::f64::consts::PI).sqrt();
    let mut s = f(lo) + f(hi);
    for i in 1..n {
        let y = lo + i as f64 * h;
        s += if i % 2 == 1 { 4.0 } else { 2.0 } * f(y);
    }
    s * h / 3.0
}

#[test]
fn lognormal_skew_against_quadrature() {
    let c = 0.5;
    let raw: Vec<f64> = (1..=3)
        .map(|k| lognormal_raw_moment_by_quadrature(c, k as f64))
        .collect();
    let by_quadrature = central_from_raw(raw[0], raw[1], raw[2])
        .unwrap()
        .skew
        .unwrap();
    let w = 0.25f64.exp();
    let closed = (w + 2.0) * (w - 1.0).sqrt();
    assert!(
        rel(by_quadrature, closed) < 1e-9,
        "{by_quadrature} vs {closed}"
    );
    let rhs = ShiftedLognormalFit::new(0.0, 0.0, c).raw_moments();
    let from_rhs = central_from_raw(rhs[0], rhs[1], rhs[2])
        .unwrap()
        .skew
        .unwrap();
    assert!(rel(from_rhs, closed) < 1e-10);
}

#[test]
fn round_trip_on_market_moments() {
    let mut r = rng(7);
    let shape = MarketShape::default();
    let mut worst: f64 = 0.0;
    for _ in 0..1000 {
        let mk = random_market(&mut r, &shape);
        let ms = asian_moments(&mk);
        let fit = fit_shifted_lognormal(&ms).unwrap();
        assert_eq!(fit.kind, FitKind::ThreeMoment);
        assert!(fit.c > 0.0);
        let back = fit.raw_moments();
        for (x, y) in back.iter().zip([ms.m1, ms.m2, ms.m3]) {
            worst = worst.max(rel(*x, y));
        }
    }
    assert!(worst <= 1e-9, "worst relative residual {worst:e}");
}

#[test]
fn agrees_with_bisection_solver() {
    let mut r = rng(8);
    for _ in 0..300 {
        let mk = random_market(&mut r, &MarketShape::default());
        let ms = asian_moments(&mk);
        let fit = fit_shifted_lognormal(&ms).unwrap();
        let (a, b, c) = bisection_fit(ms.m1, ms.mu2, ms.mu3);
        let scale = ms.m1;
        assert!((fit.a - a).abs() <= 1e-8 * scale, "a {} vs {a}", fit.a);
        assert!(
            (fit.b - b).abs() <= 1e-8 * b.abs().max(1.0),
            "b {} vs {b}",
            fit.b
        );
        assert!(rel(fit.c, c) <= 1e-8, "c {} vs {c}", fit.c);
    }
}

#[test]
fn cubic_root_is_the_only_sign_change() {
    for eta in [1e-4, 0.1, 0.7, 2.0, 9.0, 50.0, 400.0] {
        let f = |x: f64| x * x * x + 3.0 * x - eta;
        let steps = 1_000_000;
        let h = 1e3 / steps as f64;
        let mut roots = Vec::new();
        let mut prev = f(0.0);
        for i in 1..=steps {
            let x = i as f64 * h;
            let cur = f(x);
            if prev.signum() != cur.signum() {
                let (mut lo, mut hi) = (x - h, x);
                for _ in 0..100 {
                    let mid = 0.5 * (lo + hi);
                    if f(mid).signum() == f(lo).signum() {
                        lo = mid;
                    } else {
                        hi = mid;
                    }
                }
                roots.push(0.5 * (lo + hi));
            }
            prev = cur;
        }
        assert_eq!(roots.len(), 1, "eta {eta}: {roots:?}");
        let x = skew_cubic_root(eta);
        assert!(
            (x - roots[0]).abs() <= 1e-10 * x.max(1.0),
            "eta {eta}: {x} vs {}",
            roots[0]
        );
    }
}

#[test]
fn small_skew_keeps_variance() {
    let (m1, mu2) = (5.0, 0.3);
    let mut last_c = f64::INFINITY;
    for eta in [1e-1, 1e-2, 1e-3, 1e-4, 1e-5] {
        let fit = fit_central(m1, mu2, eta * mu2.powf(1.5)).unwrap();
        let [mean, var, _] = fit.central_moments();
        // a and the lognormal scale cancel in the mean
        let cancel = f64::EPSILON * (fit.a.abs() + fit.scale());
        assert!(
            (mean - m1).abs() <= 1e-12 * m1 + 4.0 * cancel,
            "eta {eta}: mean {mean}"
        );
        assert!(rel(var, mu2) < 1e-9, "eta {eta}: variance {var}");
        assert!(fit.c < last_c);
        last_c = fit.c;
    }
    assert!(last_c < 1e-4);
}

#[test]
fn lognormal_fit_residuals_on_markets() {
    let mut r = rng(9);
    for _ in 0..200 {
        let mk = random_market(&mut r, &MarketShape::default());
        let ms = asian_moments(&mk);
        let f = fit_lognormal(ms.m1, ms.m2).unwrap();
        assert!(rel(f.mean(), ms.m1) < 1e-12);
        assert!(rel(f.second_moment(), ms.m2) < 1e-12);
        let g = fit_lognormal_moments(&ms).unwrap();
        assert!(rel(g.mean(), ms.m1) < 1e-12);
        assert!(rel(g.second_moment(), ms.m2) < 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(1000))]

    #[test]
    fn round_trip_on_parameter_space(a in -50.0f64..50.0, b in -3.0f64..3.0, c in 0.02f64..1.5) {
        let truth = ShiftedLognormalFit::new(a, b, c);
        let ms = truth.moment_set();
        let fit = fit_shifted_lognormal(&ms).unwrap();
        let back = fit.raw_moments();
        for (x, y) in back.iter().zip([ms.m1, ms.m2, ms.m3]) {
            prop_assert!(rel(*x, y) <= 1e-9 || (x - y).abs() <= 1e-9 * ms.m2.sqrt().powi(3));
        }
        prop_assert!(rel(fit.c, c) < 1e-8);
    }

    #[test]
    fn fit_is_continuous(a in -5.0f64..5.0, b in -1.0f64..1.0, c in 0.1f64..1.0, e in -1.0f64..1.0) {
        let ms = ShiftedLognormalFit::new(a, b, c).moment_set();
        let base = fit_central(ms.m1, ms.mu2, ms.mu3).unwrap();
        let bump = 1.0 + 1e-8 * e;
        let moved = fit_central(ms.m1 * bump, ms.mu2 * bump, ms.mu3 * bump).unwrap();
        prop_assert!((moved.a - base.a).abs() <= 1e-4 * base.a.abs().max(1.0));
        prop_assert!((moved.b - base.b).abs() <= 1e-4 * base.b.abs().max(1.0));
        prop_assert!((moved.c - base.c).abs() <= 1e-4 * base.c);
    }
}
