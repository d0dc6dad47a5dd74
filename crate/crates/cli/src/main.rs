//! `els`: valuation of guaranteed-return equity-linked securities from JSON
//! instrument files.

mod commands;
mod error;
mod instrument;
mod output;

use std::io::Write;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand};
use els_core::montecarlo::McConfig;

use commands::{CompareArgs, Ctx, GreeksArgs, Method, VegaScale};
use error::{CliError, Result};
use output::Format;

const DEFAULT_SEED: u64 = 20_190_602;

#[derive(Debug, Parser)]
#[command(
    name = "els",
    version,
    about = "Moment-matched valuation of equity-linked securities"
)]
struct Cli {
    /// Output format.
    #[arg(long, value_enum, default_value_t = Format::Text, global = true)]
    format: Format,

    /// Significant digits of numeric output.
    #[arg(long, default_value_t = 6, global = true,
          value_parser = clap::value_parser!(u8).range(1..=17))]
    precision: u8,

    /// Worker threads for simulation (0 = one per core).
    #[arg(long, env = "ELS_THREADS", global = true)]
    threads: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Price the embedded Asian call (and the whole security if a guarantee is given).
    Price {
        file: PathBuf,
        /// Relative volatility shift in percent: σ ← σ (1 + s/100).
        #[arg(long, default_value_t = 0.0, allow_hyphen_values = true)]
        vol_shift: f64,
        /// Report values as a percentage of the notional (sum of weights).
        #[arg(long)]
        notional_normalize: bool,
    },
    /// Model, Monte Carlo and two-moment prices across volatility shifts.
    Compare {
        file: PathBuf,
        /// Comma-separated volatility shifts in percent.
        #[arg(long, value_delimiter = ',', allow_hyphen_values = true,
              default_values_t = [-50.0, 0.0, 50.0, 100.0])]
        shifts: Vec<f64>,
        /// Simulated paths per shift; 0 skips the simulation.
        #[arg(long, default_value_t = McConfig::default().n_paths)]
        mc_paths: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        /// Use antithetic pairs; --mc-paths then counts pairs.
        #[arg(long)]
        antithetic: bool,
        #[arg(long)]
        notional_normalize: bool,
    },
    /// Delta and vega with respect to one index.
    Greeks {
        file: PathBuf,
        /// Index position, counted from 1.
        #[arg(long, default_value_t = 1)]
        index: usize,
        /// Comma-separated methods; analytic and fd together are cross-checked.
        #[arg(long, value_enum, value_delimiter = ',', default_values_t = [Method::Analytic])]
        method: Vec<Method>,
        #[arg(long, default_value_t = McConfig::default().n_paths)]
        mc_paths: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
        #[arg(long, value_enum, default_value_t = VegaScale::Unit)]
        vega_scale: VegaScale,
    },
    /// Value the maturity guarantee of a segregated fund.
    Segfund {
        file: PathBuf,
        /// Paths for a Monte Carlo check; 0 skips it.
        #[arg(long, default_value_t = 0)]
        mc_paths: usize,
        #[arg(long, default_value_t = DEFAULT_SEED)]
        seed: u64,
    },
    /// Check an instrument file without pricing it.
    Validate { file: PathBuf },
}

fn run(cli: Cli) -> Result<String> {
    if let Some(n) = cli.threads {
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .map_err(|e| CliError::Usage(format!("cannot start {n} threads: {e}")))?;
    }
    let ctx = Ctx {
        format: cli.format,
        digits: cli.precision as usize,
    };
    match cli.command {
        Command::Price {
            file,
            vol_shift,
            notional_normalize,
        } => commands::price(
            ctx,
            &instrument::load(&file)?,
            vol_shift,
            notional_normalize,
        ),
        Command::Compare {
            file,
            shifts,
            mc_paths,
            seed,
            antithetic,
            notional_normalize,
        } => {
            let args = CompareArgs {
                shifts,
                mc_paths,
                seed,
                antithetic,
                normalize: notional_normalize,
            };
            commands::compare(ctx, &instrument::load(&file)?, &args)
        }
        Command::Greeks {
            file,
            index,
            method,
            mc_paths,
            seed,
            vega_scale,
        } => {
            let args = GreeksArgs {
                index,
                methods: method,
                mc_paths,
                seed,
                vega_scale,
            };
            commands::greeks(ctx, &instrument::load(&file)?, &args)
        }
        Command::Segfund {
            file,
            mc_paths,
            seed,
        } => commands::segfund(ctx, &instrument::load(&file)?, mc_paths, seed),
        Command::Validate { file } => commands::validate(ctx, &instrument::load(&file)?),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    // the report is built in full before anything is written
    match run(cli) {
        Ok(report) => {
            let mut stdout = std::io::stdout().lock();
            if stdout
                .write_all(report.as_bytes())
                .and_then(|_| stdout.flush())
                .is_err()
            {
                return ExitCode::from(1);
            }
            ExitCode::SUCCESS
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code())
        }
    }
}
