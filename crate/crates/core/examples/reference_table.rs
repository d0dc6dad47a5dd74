//! Prints model, Monte Carlo and Levy prices and first-index hedge ratios
//! for the reference basket.
//!
//! `cargo run --release -p els-core --example reference_table [paths]`

use els_core::benchmark::{reference_market, VOL_SHIFTS};
use els_core::greeks::{analytic_greeks, fd_greeks, mc_fd_greeks, BumpSpec};
use els_core::montecarlo::{mc_asian_call, McConfig};
use els_core::pricer::{asian_call_price, levy_call_price, LevyTarget};

fn main() -> Result<(), Box<dyn std::error::Error>> {
    let n_paths = std::env::args()
        .nth(1)
        .map(|s| s.parse())
        .transpose()?
        .unwrap_or(1_000_000);
    let config = McConfig::new(n_paths, 42);
    let base = reference_market();

    println!(
        "{:>6} {:>10} {:>10} {:>9} {:>10}",
        "shift", "model", "mc", "mc_se", "levy"
    );
    for shift in VOL_SHIFTS {
        let mk = base.with_vol_shift(shift)?;
        let model = asian_call_price(&mk)?;
        let mc = mc_asian_call(&mk, &config)?;
        let levy = levy_call_price(&mk, LevyTarget::Average)?;
        println!(
            "{shift:>6} {:>10.5} {:>10.5} {:>9.5} {:>10.5}",
            model.value, mc.mean, mc.std_error, levy.value
        );
        if shift == 0.0 {
            if let Some(f) = model.shifted_fit() {
                println!("       a={:.4} b={:.4} c={:.4}", f.a, f.b, f.c);
            }
        }
    }

    let analytic = analytic_greeks(&base)?;
    let mc = mc_fd_greeks(&base, &config, BumpSpec::default())?;
    let levy = fd_greeks(
        &base,
        |mk| Ok(levy_call_price(mk, LevyTarget::Average)?.value),
        BumpSpec::default(),
    )?;
    println!(
        "delta  model {:.6}  mc {:.6} ± {:.6}  levy {:.6}",
        analytic.deltas[0], mc.deltas[0].mean, mc.deltas[0].std_error, levy.deltas[0]
    );
    println!(
        "vega   model {:.4}  mc {:.4} ± {:.4}  levy {:.4}",
        analytic.vegas[0], mc.vegas[0].mean, mc.vegas[0].std_error, levy.vegas[0]
    );
    Ok(())
}
