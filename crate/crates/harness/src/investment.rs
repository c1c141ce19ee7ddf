//! Infrastructure sizing: welfare over the operating period minus the cost
//! of chargers, cables and their upkeep.

use std::io::Write;

use parkcharge_core::model::FacilityConfig;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, ConfigError, InvestmentSpec};
use crate::experiment::{run_days, scenario_days, seed_range, ExperimentError, Mode};

/// `sum_l (I_C C_l + I_M) M_l + months * sum_l I_mn M_l`.
pub fn investment_cost(spec: &InvestmentSpec, facilities: &[FacilityConfig]) -> f64 {
    facilities
        .iter()
        .map(|f| {
            let m = f.evse_count as f64;
            (spec.per_cable_cost * f64::from(f.cables_per_evse) + spec.per_evse_install) * m
                + f64::from(spec.months) * spec.monthly_maintenance * m
        })
        .sum()
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub evse_count: usize,
    pub cables_per_evse: u32,
    pub mean_daily_welfare: f64,
    /// Mean daily welfare times the operating days.
    pub welfare: f64,
    pub investment: f64,
    pub net: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SweepReport {
    pub config: String,
    pub spec: InvestmentSpec,
    pub points: Vec<SweepPoint>,
    pub best: Option<SweepPoint>,
}

impl SweepReport {
    /// Best net value is not on the edge of the grid: every smaller and
    /// every larger configuration in the sweep does worse.
    pub fn interior_maximum(&self) -> bool {
        let Some(best) = &self.best else {
            return false;
        };
        let smallest = self.corner(false);
        let largest = self.corner(true);
        match (smallest, largest) {
            (Some(lo), Some(hi)) => lo.net < best.net && hi.net < best.net,
            _ => false,
        }
    }

    fn corner(&self, largest: bool) -> Option<&SweepPoint> {
        let key = |p: &&SweepPoint| (p.evse_count, p.cables_per_evse);
        if largest {
            self.points.iter().max_by_key(key)
        } else {
            self.points.iter().min_by_key(key)
        }
    }
}

/// Every facility gets the same `(M, C)`; the mechanism runs over the same
/// scenario days for each grid point.
pub fn investment_sweep(config: &Config, seed: u64) -> Result<SweepReport, ExperimentError> {
    let spec = config
        .investment
        .clone()
        .ok_or_else(|| ExperimentError::Config(ConfigError::Invalid("no [investment] section".into())))?;
    let base = config.facilities();
    let grid_points: Vec<(usize, u32)> = spec
        .evse_counts
        .iter()
        .flat_map(|&m| spec.cable_counts.iter().map(move |&c| (m, c)))
        .collect();
    let params = parkcharge_core::scenarios::ScenarioParams {
        days: spec.simulated_days,
        ..config.scenario.clone()
    };
    let days = if spec.simulated_days > 0 {
        scenario_days(&params, &base, config, &seed_range(seed, 1))?
    } else {
        Vec::new()
    };
    let points: Vec<SweepPoint> = grid_points
        .par_iter()
        .map(|&(m, c)| {
            let facilities: Vec<FacilityConfig> = base
                .iter()
                .map(|f| FacilityConfig {
                    evse_count: m,
                    cables_per_evse: c,
                    ..f.clone()
                })
                .collect();
            let mean_daily_welfare = if days.is_empty() {
                0.0
            } else {
                run_days(config, &facilities, Mode::Mechanism, &[seed], &days)?
                    .aggregate
                    .mean_welfare
            };
            let welfare = mean_daily_welfare * spec.operating_days as f64;
            let investment = investment_cost(&spec, &facilities);
            Ok(SweepPoint {
                evse_count: m,
                cables_per_evse: c,
                mean_daily_welfare,
                welfare,
                investment,
                net: welfare - investment,
            })
        })
        .collect::<Result<_, ExperimentError>>()?;
    // first strict maximum in grid order
    let best = points
        .iter()
        .fold(None::<&SweepPoint>, |b, p| match b {
            Some(q) if q.net >= p.net => Some(q),
            _ => Some(p),
        })
        .cloned();
    Ok(SweepReport {
        config: config.name.clone(),
        spec,
        points,
        best,
    })
}

pub fn write_sweep_csv<W: Write>(report: &SweepReport, out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for p in &report.points {
        w.serialize(p)?;
    }
    w.flush()?;
    Ok(())
}
