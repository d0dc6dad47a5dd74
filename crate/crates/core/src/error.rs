use thiserror::Error;

use crate::market_model::Violation;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum Error {
    #[error("dimension mismatch: {0}")]
    DimensionMismatch(String),

    #[error("invalid input: {0}")]
    InvalidInput(String),

    #[error("invalid market data: {}", join(.0))]
    InvalidMarket(Vec<Violation>),

    #[error("unmatchable skew {0:e}: a shifted lognormal only has positive skew")]
    UnmatchableSkew(f64),

    #[error("degenerate distribution (variance {0:e})")]
    Degenerate(f64),

    #[error("negative variance {0:e}: moments are inconsistent")]
    NegativeVariance(f64),

    #[error("correlation matrix is not positive semi-definite (pivot {0:e})")]
    NotPositiveSemiDefinite(f64),

    #[error("bad date: {0}")]
    Date(String),

    #[error("unsupported: {0}")]
    Unsupported(String),
}

fn join(violations: &[Violation]) -> String {
    violations
        .iter()
        .map(|v| v.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

pub type Result<T> = std::result::Result<T, Error>;
