use els_core::greeks::{
    analytic_greeks, fd_greeks, mc_fd_greeks, BumpSpec, FdScheme, GreeksResult,
};
use els_core::market_model::Market;
use els_core::moment_match::FitKind;
use els_core::montecarlo::{mc_asian_call, mc_segfund_put, McConfig};
use els_core::pricer::{
    asian_call_price, levy_call_price, segfund_put_price, Branch, Fit, LevyTarget, PriceResult,
};
use serde_json::{json, Value};

use crate::error::{CliError, Result};
use crate::instrument::Instrument;
use crate::output::{num, pretty, sig, Cell, Fields, Format, Table};

/// Relative gap between analytic and fourth-order finite-difference greeks
/// above which the greeks table flags a breach.
pub const FD_TOLERANCE: f64 = 1e-5;
/// Standard errors between model and simulated greeks above which the table
/// flags a breach.
pub const MC_Z_LIMIT: f64 = 3.0;

#[derive(Debug, Clone, Copy)]
pub struct Ctx {
    pub format: Format,
    pub digits: usize,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Method {
    Analytic,
    Fd,
    McFd,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum VegaScale {
    /// Per unit of annualized volatility.
    Unit,
    /// Per volatility point (0.01).
    Point,
}

fn notional(market: &Market) -> f64 {
    market.basket().weights().iter().sum()
}

fn branch_name(b: Branch) -> &'static str {
    match b {
        Branch::Integral => "integral",
        Branch::ShiftDominates => "shift-dominates",
        Branch::Degenerate => "degenerate",
    }
}

fn fit_fields(out: &mut Fields, p: &PriceResult) {
    match &p.fit {
        Some(Fit::ShiftedLognormal(f)) => {
            let kind = match f.kind {
                FitKind::ThreeMoment => "three-moment",
                FitKind::SkewFloor => "skew-floor",
            };
            out.add_text(
                "fit",
                format!("a={:.4} b={:.4} c={:.4} ({kind})", f.a, f.b, f.c),
            );
            out.add_data("a", f.a).add_data("b", f.b).add_data("c", f.c);
            out.add_data("fit_kind", kind);
        }
        Some(Fit::Lognormal(f)) => {
            out.add_text(
                "fit",
                format!("lognormal mean={:.4} stdev={:.4}", f.log_mean, f.log_stdev),
            );
            out.add_data("log_mean", f.log_mean)
                .add_data("log_stdev", f.log_stdev);
        }
        None => {
            out.add("fit", "none (zero variance)");
        }
    }
}

fn moment_fields(out: &mut Fields, p: &PriceResult) {
    let m = &p.moments;
    out.add("m1", m.m1).add("m2", m.m2).add("m3", m.m3);
    out.add("skewness", m.skew);
}

pub fn price(ctx: Ctx, inst: &Instrument, vol_shift: f64, normalize: bool) -> Result<String> {
    let market = inst.market()?.with_vol_shift(vol_shift)?;
    let p = asian_call_price(&market)?;
    let scale = if normalize {
        100.0 / notional(&market)
    } else {
        1.0
    };
    let mut out = Fields::default();
    out.add("instrument", inst.name.as_str());
    out.add("vol_shift_pct", vol_shift);
    out.add("strike", p.strike);
    moment_fields(&mut out, &p);
    fit_fields(&mut out, &p);
    out.add("branch", branch_name(p.branch));
    out.add("discount_factor", p.discount_factor);
    out.add(
        "units",
        if normalize {
            "percent of notional"
        } else {
            "currency"
        },
    );
    out.add("price", p.value * scale);
    if let Some(g) = &inst.guarantee {
        out.add("guarantee", g.amount() * scale);
        out.add(
            "security_value",
            (p.value + p.discount_factor * g.amount()) * scale,
        );
    }
    Ok(out.render(ctx.format, ctx.digits))
}

pub struct CompareArgs {
    pub shifts: Vec<f64>,
    pub mc_paths: usize,
    pub seed: u64,
    pub antithetic: bool,
    pub normalize: bool,
}

pub fn compare(ctx: Ctx, inst: &Instrument, args: &CompareArgs) -> Result<String> {
    let base = inst.market()?;
    let scale = if args.normalize {
        100.0 / notional(base)
    } else {
        1.0
    };
    let config = McConfig::new(args.mc_paths.max(1), args.seed).antithetic(args.antithetic);
    let mut table = Table::new(vec!["shift", "model", "mc", "mc_se", "levy"]);
    for &shift in &args.shifts {
        let market = base.with_vol_shift(shift)?;
        let model = asian_call_price(&market)?.value;
        let levy = levy_call_price(&market, LevyTarget::Average)?.value;
        let mc = if args.mc_paths > 0 {
            Some(mc_asian_call(&market, &config)?)
        } else {
            None
        };
        table.push(vec![
            Cell::from(shift),
            Cell::from(model * scale),
            Cell::from(mc.map(|e| e.mean * scale)),
            Cell::from(mc.map(|e| e.std_error * scale)),
            Cell::from(levy * scale),
        ]);
    }
    let units = if args.normalize {
        "percent of notional"
    } else {
        "currency"
    };
    Ok(match ctx.format {
        Format::Csv => table.csv(ctx.digits),
        Format::Text => {
            let mut s = format!("{}: Asian call by volatility shift (%)\n", inst.name);
            s.push_str(&table.text(ctx.digits));
            s.push_str(&format!(
                "notional {}, values in {units}",
                sig(notional(base), ctx.digits)
            ));
            if args.mc_paths > 0 {
                let kind = if args.antithetic {
                    " antithetic pairs"
                } else {
                    " paths"
                };
                s.push_str(&format!("; MC {}{kind}, seed {}", args.mc_paths, args.seed));
            }
            s.push('\n');
            s
        }
        Format::Json => pretty(&json!({
            "instrument": inst.name,
            "notional": num(notional(base), ctx.digits),
            "units": units,
            "mc_paths": args.mc_paths,
            "seed": args.seed,
            "antithetic": args.antithetic,
            "rows": table.json(ctx.digits),
        })),
    })
}

pub struct GreeksArgs {
    pub index: usize,
    pub methods: Vec<Method>,
    pub mc_paths: usize,
    pub seed: u64,
    pub vega_scale: VegaScale,
}

fn model_price(m: &Market) -> els_core::Result<f64> {
    Ok(asian_call_price(m)?.value)
}

fn levy_price(m: &Market) -> els_core::Result<f64> {
    Ok(levy_call_price(m, LevyTarget::Average)?.value)
}

fn rel_gap(x: f64, y: f64) -> f64 {
    let scale = x.abs().max(y.abs());
    if scale == 0.0 {
        0.0
    } else {
        (x - y).abs() / scale
    }
}

pub fn greeks(ctx: Ctx, inst: &Instrument, args: &GreeksArgs) -> Result<String> {
    let market = inst.market()?;
    let m = market.basket().len();
    if args.index == 0 || args.index > m {
        return Err(CliError::Usage(format!(
            "index {} out of range: the basket has {m} indices (numbered from 1)",
            args.index
        )));
    }
    let j = args.index - 1;
    let wants = |x: Method| args.methods.contains(&x);
    let vega_unit = match args.vega_scale {
        VegaScale::Unit => 1.0,
        VegaScale::Point => 0.01,
    };

    let analytic = if wants(Method::Analytic) {
        Some(analytic_greeks(market)?)
    } else {
        None
    };
    let fd = if wants(Method::Fd) {
        let bump = BumpSpec {
            spot_rel: 1e-3,
            vol_abs: 1e-3,
            scheme: FdScheme::FourthOrder,
        };
        Some(fd_greeks(market, model_price, bump)?)
    } else {
        None
    };
    let mc = if wants(Method::McFd) && args.mc_paths > 0 {
        Some(mc_fd_greeks(
            market,
            &McConfig::new(args.mc_paths, args.seed),
            BumpSpec::default(),
        )?)
    } else {
        None
    };
    let levy = fd_greeks(market, levy_price, BumpSpec::default())?;
    let model: Option<&GreeksResult> = analytic.as_ref().or(fd.as_ref());

    let mut notes = Vec::new();
    if let Some(reason) = analytic.as_ref().and_then(|g| g.fallback.as_ref()) {
        notes.push(format!("analytic route unavailable: {reason}"));
    }
    if let (Some(a), Some(f)) = (&analytic, &fd) {
        for (name, x, y) in [
            ("delta", a.deltas[j], f.deltas[j]),
            ("vega", a.vegas[j], f.vegas[j]),
        ] {
            let gap = rel_gap(x, y);
            if gap > FD_TOLERANCE {
                notes.push(format!(
                    "breach: {name} analytic {} vs finite difference {} (relative gap {gap:.1e} > {FD_TOLERANCE:e})",
                    sig(x, ctx.digits),
                    sig(y, ctx.digits)
                ));
            }
        }
    }
    if let (Some(g), Some(e)) = (model, &mc) {
        for (name, x, est) in [
            ("delta", g.deltas[j], e.deltas[j]),
            ("vega", g.vegas[j], e.vegas[j]),
        ] {
            let z = est.z_score(x);
            if z > MC_Z_LIMIT {
                notes.push(format!(
                    "breach: {name} model {} vs MC {} ± {} ({z:.1} standard errors)",
                    sig(x, ctx.digits),
                    sig(est.mean, ctx.digits),
                    sig(est.std_error, ctx.digits)
                ));
            }
        }
    }

    let mut table = Table::new(vec!["hedge_ratio", "model", "mc", "levy"]);
    table.push(vec![
        Cell::from("Price Delta"),
        Cell::from(model.map(|g| g.deltas[j])),
        Cell::from(mc.as_ref().map(|e| e.deltas[j].mean)),
        Cell::from(levy.deltas[j]),
    ]);
    table.push(vec![
        Cell::from("Vega"),
        Cell::from(model.map(|g| g.vegas[j] * vega_unit)),
        Cell::from(mc.as_ref().map(|e| e.vegas[j].mean * vega_unit)),
        Cell::from(levy.vegas[j] * vega_unit),
    ]);

    let index_name = &market.basket().indices()[j].name;
    Ok(match ctx.format {
        Format::Csv => {
            for n in &notes {
                eprintln!("{n}");
            }
            table.csv(ctx.digits)
        }
        Format::Text => {
            let mut s = format!(
                "{}: hedge ratios with respect to index {} ({index_name})\n",
                inst.name, args.index
            );
            s.push_str(&table.text(ctx.digits));
            if let Some(e) = &mc {
                s.push_str(&format!(
                    "MC standard errors: delta {}, vega {} ({} paths, seed {})\n",
                    sig(e.deltas[j].std_error, ctx.digits),
                    sig(e.vegas[j].std_error * vega_unit, ctx.digits),
                    args.mc_paths,
                    args.seed
                ));
            }
            let per = match args.vega_scale {
                VegaScale::Unit => "per unit of volatility",
                VegaScale::Point => "per volatility point",
            };
            s.push_str(&format!("vega {per}\n"));
            for n in &notes {
                s.push_str(n);
                s.push('\n');
            }
            s
        }
        Format::Json => {
            let mc_se = mc.as_ref().map(|e| {
                json!({
                    "delta": num(e.deltas[j].std_error, ctx.digits),
                    "vega": num(e.vegas[j].std_error * vega_unit, ctx.digits),
                })
            });
            pretty(&json!({
                "instrument": inst.name,
                "index": args.index,
                "index_name": index_name,
                "vega_scale": match args.vega_scale { VegaScale::Unit => "unit", VegaScale::Point => "point" },
                "rows": table.json(ctx.digits),
                "mc_se": mc_se.unwrap_or(Value::Null),
                "notes": notes,
            }))
        }
    })
}

pub fn segfund(ctx: Ctx, inst: &Instrument, mc_paths: usize, seed: u64) -> Result<String> {
    let fund = inst.fund()?;
    let p = segfund_put_price(
        fund,
        &inst.indices,
        &inst.correlation,
        &inst.discount,
        inst.maturity,
    )?;
    let units = fund.units(&inst.indices);
    let weights = fund.terminal_weights(&inst.indices);
    let mut out = Fields::default();
    out.add("instrument", inst.name.as_str());
    out.add("principal", fund.principal);
    out.add("maturity", inst.maturity);
    out.add("fee_survival", fund.fee_survival());
    for ((ix, u), w) in inst.indices.iter().zip(&units).zip(&weights) {
        out.add(format!("units {}", ix.name), *u);
        out.add(format!("terminal_weight {}", ix.name), *w);
    }
    moment_fields(&mut out, &p);
    fit_fields(&mut out, &p);
    out.add("branch", branch_name(p.branch));
    out.add("discount_factor", p.discount_factor);
    out.add("put_value", p.value);
    if mc_paths > 0 {
        let est = mc_segfund_put(
            fund,
            &inst.indices,
            &inst.correlation,
            &inst.discount,
            inst.maturity,
            &McConfig::new(mc_paths, seed),
        )?;
        out.add("mc_put_value", est.mean);
        out.add("mc_std_error", est.std_error);
        out.add("mc_z_score", est.z_score(p.value));
    }
    Ok(out.render(ctx.format, ctx.digits))
}

pub fn validate(ctx: Ctx, inst: &Instrument) -> Result<String> {
    let mut out = Fields::default();
    out.add("instrument", inst.name.as_str());
    if let Some(d) = &inst.description {
        out.add("description", d.as_str());
    }
    out.add("status", "valid");
    out.add("indices", inst.indices.len());
    out.add("maturity", inst.maturity);
    out.add("rate", inst.discount.rate);
    match &inst.market {
        Some(m) => {
            out.add("observations", m.schedule().len());
            out.add("notional", notional(m));
        }
        None => {
            out.add("observations", Cell::Blank);
        }
    }
    out.add("guarantee", inst.guarantee.map(|g| g.amount()));
    out.add("segfund", if inst.fund.is_some() { "yes" } else { "no" });
    Ok(out.render(ctx.format, ctx.digits))
}
