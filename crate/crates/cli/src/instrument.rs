//! Instrument files: JSON descriptions of a basket, its market data and an
//! optional segregated-fund wrapper.

use std::path::Path;

use els_core::market_model::{
    build_basket, build_schedule_from_dates, validate_fund, validate_market, CorrelationMatrix,
    DiscountSpec, GuaranteeSpec, IndexSpec, Market, ObservationSchedule, SegFundSpec,
};
use serde::Deserialize;

use crate::error::{CliError, Result};

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InstrumentFile {
    #[serde(default)]
    pub name: Option<String>,
    #[serde(default)]
    pub description: Option<String>,
    pub indices: Vec<IndexEntry>,
    #[serde(default)]
    pub weights: Option<Vec<f64>>,
    pub correlation: Vec<Vec<f64>>,
    pub rate: f64,
    #[serde(default)]
    pub maturity: Option<f64>,
    #[serde(default)]
    pub observation_times: Option<Vec<f64>>,
    #[serde(default)]
    pub valuation_date: Option<String>,
    #[serde(default)]
    pub observation_dates: Option<Vec<String>>,
    #[serde(default)]
    pub maturity_date: Option<String>,
    #[serde(default)]
    pub guarantee: Option<f64>,
    #[serde(default)]
    pub segfund: Option<SegFundEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct IndexEntry {
    pub name: String,
    pub spot: f64,
    pub vol: f64,
    #[serde(default)]
    pub div_yield: f64,
    #[serde(default)]
    pub drift_override: Option<f64>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct SegFundEntry {
    pub principal: f64,
    pub allocations: Vec<f64>,
    #[serde(default)]
    pub fees: Vec<FeeEntry>,
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FeeEntry {
    pub time: f64,
    pub management: f64,
    pub protection: f64,
}

/// A loaded and fully validated instrument file.
#[derive(Debug, Clone)]
pub struct Instrument {
    pub name: String,
    pub description: Option<String>,
    pub indices: Vec<IndexSpec>,
    pub correlation: CorrelationMatrix,
    pub discount: DiscountSpec,
    pub maturity: f64,
    pub market: Option<Market>,
    pub guarantee: Option<GuaranteeSpec>,
    pub fund: Option<SegFundSpec>,
}

impl Instrument {
    pub fn market(&self) -> Result<&Market> {
        self.market.as_ref().ok_or_else(|| {
            CliError::Usage(
                "instrument has no basket option: it needs weights and an observation schedule"
                    .into(),
            )
        })
    }

    pub fn fund(&self) -> Result<&SegFundSpec> {
        self.fund
            .as_ref()
            .ok_or_else(|| CliError::Usage("instrument has no segfund block".into()))
    }
}

fn invalid(e: els_core::Error) -> CliError {
    CliError::schema(e.to_string())
}

pub fn load(path: &Path) -> Result<Instrument> {
    let text = std::fs::read_to_string(path).map_err(|source| CliError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    let file: InstrumentFile = serde_json::from_str(&text).map_err(|source| CliError::Json {
        path: path.to_path_buf(),
        source,
    })?;
    let fallback = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    file.into_instrument(fallback)
}

impl InstrumentFile {
    fn schedule(&self) -> Result<Option<ObservationSchedule>> {
        let by_dates = self.observation_dates.is_some()
            || self.valuation_date.is_some()
            || self.maturity_date.is_some();
        match (&self.observation_times, by_dates) {
            (Some(_), true) => Err(CliError::schema(
                "give either observation_times or observation dates, not both",
            )),
            (Some(times), false) => {
                let maturity = self
                    .maturity
                    .ok_or_else(|| CliError::schema("observation_times requires maturity"))?;
                Ok(Some(ObservationSchedule::new(times.clone(), maturity)))
            }
            (None, true) => {
                if self.maturity.is_some() {
                    return Err(CliError::schema(
                        "with dates, give maturity_date instead of maturity",
                    ));
                }
                let (Some(valuation), Some(maturity)) = (&self.valuation_date, &self.maturity_date)
                else {
                    return Err(CliError::schema(
                        "dated schedules need valuation_date and maturity_date",
                    ));
                };
                let dates = self.observation_dates.as_deref().unwrap_or_default();
                if dates.is_empty() {
                    // a fund-only file may date its maturity without observations
                    let terminal = build_schedule_from_dates::<&str>(valuation, &[], maturity)
                        .map_err(invalid)?;
                    return Ok(Some(terminal));
                }
                Ok(Some(
                    build_schedule_from_dates(valuation, dates, maturity).map_err(invalid)?,
                ))
            }
            (None, false) => Ok(None),
        }
    }

    fn into_instrument(self, fallback_name: String) -> Result<Instrument> {
        let mut problems = Vec::new();
        let indices: Vec<IndexSpec> = self
            .indices
            .iter()
            .map(|e| {
                let mut ix =
                    IndexSpec::new(e.name.clone(), e.spot, e.vol).with_div_yield(e.div_yield);
                ix.drift_override = e.drift_override;
                ix
            })
            .collect();
        if indices.is_empty() {
            problems.push("at least one index is required".to_string());
        }
        let correlation = CorrelationMatrix::from_rows(&self.correlation).map_err(invalid)?;
        let discount = DiscountSpec::new(self.rate);
        let schedule = self.schedule()?;
        let maturity = match (&schedule, self.maturity) {
            (Some(s), _) => s.maturity(),
            (None, Some(t)) => t,
            (None, None) => {
                return Err(CliError::schema("maturity is required"));
            }
        };

        let market = match (&self.weights, schedule) {
            (Some(_), Some(schedule)) if schedule.is_empty() => {
                problems.push("weights given without observation dates".into());
                None
            }
            (Some(weights), Some(schedule)) => {
                match build_basket(indices.clone(), weights.clone()) {
                    Ok(basket) => {
                        let report = validate_market(&basket, &correlation, &schedule, &discount);
                        if report.is_ok() {
                            Some(Market::new(
                                basket,
                                correlation.clone(),
                                schedule,
                                discount,
                            )?)
                        } else {
                            problems.extend(report.violations.iter().map(|v| v.to_string()));
                            None
                        }
                    }
                    Err(e) => {
                        problems.push(e.to_string());
                        None
                    }
                }
            }
            (Some(_), None) => {
                problems.push("weights given without an observation schedule".into());
                None
            }
            (None, Some(s)) if !s.is_empty() => {
                problems.push("observation schedule given without weights".into());
                None
            }
            (None, _) => None,
        };

        let guarantee = match self.guarantee {
            Some(p) => match GuaranteeSpec::new(p) {
                Ok(g) => Some(g),
                Err(e) => {
                    problems.push(e.to_string());
                    None
                }
            },
            None => None,
        };
        if guarantee.is_some() && market.is_none() && self.weights.is_none() {
            problems.push("guarantee given without a basket".into());
        }

        let fund = self.segfund.map(|sf| {
            let (times, (mgmt, prot)): (Vec<f64>, (Vec<f64>, Vec<f64>)) = sf
                .fees
                .iter()
                .map(|f| (f.time, (f.management, f.protection)))
                .unzip();
            SegFundSpec::new(sf.principal, sf.allocations).with_fees(times, mgmt, prot)
        });
        if let Some(f) = &fund {
            let report = validate_fund(f, &indices, &correlation, &discount, maturity);
            problems.extend(report.violations.iter().map(|v| v.to_string()));
        }
        if market.is_none() && fund.is_none() && problems.is_empty() {
            problems
                .push("nothing to value: give weights and a schedule, or a segfund block".into());
        }

        if !problems.is_empty() {
            problems.dedup();
            return Err(CliError::Schema(problems));
        }
        Ok(Instrument {
            name: self.name.unwrap_or(fallback_name),
            description: self.description,
            indices,
            correlation,
            discount,
            maturity,
            market,
            guarantee,
            fund,
        })
    }
}
