//! Experiment drivers: run one controller over seeded scenario days.

use std::io::Write;
use std::path::Path;

use parkcharge_core::baselines::{run_cec, run_fcfs, CecError};
use parkcharge_core::mechanism::{run_sequence, ForecastMode, MechanismError, RunOutcome, WelfareSummary};
use parkcharge_core::model::{
    AllocationError, AllocationState, Decision, FacilityConfig, Instance, ScheduleOption, UserId, UserRequest,
};
use parkcharge_core::oracle::{empirical_ratio, solve_offline, OracleError};
use parkcharge_core::pricing::{compute_bounds_for_levels, PricingError};
use parkcharge_core::scenarios::{
    buffer_transform, expected_arrivals, linear_widths, make_forecast, sample_scenario, DayTrace, ScenarioError,
    ScenarioParams, ScenarioTrace,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::{Config, ConfigError, ForecastKind};

/// Ids of CEC's virtual arrivals start here.
pub const EXPECTED_ID_BASE: u32 = 1_000_000;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum Mode {
    Mechanism,
    Fcfs,
    Cec,
    Offline,
}

impl Mode {
    pub fn name(self) -> &'static str {
        match self {
            Mode::Mechanism => "mechanism",
            Mode::Fcfs => "fcfs",
            Mode::Cec => "cec",
            Mode::Offline => "offline",
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum ExperimentError {
    #[error(transparent)]
    Config(#[from] ConfigError),
    #[error(transparent)]
    Scenario(#[from] ScenarioError),
    #[error("seed {seed} day {day}")]
    Bounds {
        seed: u64,
        day: usize,
        source: PricingError,
    },
    #[error(transparent)]
    Mechanism(#[from] MechanismError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
    #[error(transparent)]
    Cec(#[from] CecError),
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error("seed {seed} day {day}: {problems:?}")]
    Invariant {
        seed: u64,
        day: usize,
        problems: Vec<String>,
    },
    #[error(transparent)]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error(transparent)]
    Json(#[from] serde_json::Error),
}

/// Metrics of one controller on one scenario day.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayMetrics {
    pub mode: Mode,
    pub seed: u64,
    pub day: usize,
    pub arrivals: usize,
    pub admitted: usize,
    pub gross_value: f64,
    pub electricity_cost: f64,
    pub welfare: f64,
    pub total_utility: f64,
    pub payments: f64,
    pub energy_delivered: f64,
    pub solar_used: f64,
    pub solar_available: f64,
    pub solar_utilization: f64,
}

impl DayMetrics {
    fn new(mode: Mode, seed: u64, day: usize, s: &WelfareSummary) -> Self {
        Self {
            mode,
            seed,
            day,
            arrivals: s.arrivals,
            admitted: s.admitted,
            gross_value: s.gross_value,
            electricity_cost: s.operational_cost,
            welfare: s.welfare,
            total_utility: s.total_utility,
            payments: s.total_payments,
            energy_delivered: s.energy_delivered,
            solar_used: s.solar_used,
            solar_available: s.solar_available,
            solar_utilization: s.solar_utilization(),
        }
    }

    /// Welfare equals utility plus payments minus electricity cost.
    pub fn accounting_gap(&self) -> f64 {
        (self.welfare - (self.total_utility + self.payments - self.electricity_cost))
            .abs()
            .max((self.gross_value - self.total_utility - self.payments).abs())
    }
}

/// Procurement and solar per facility and slot, for load-profile plots.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SlotMetrics {
    pub mode: Mode,
    pub seed: u64,
    pub day: usize,
    pub facility: u32,
    pub slot: usize,
    pub solar: f64,
    pub demand: u32,
    pub solar_used: f64,
    pub grid_energy: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Aggregate {
    pub days: usize,
    pub mean_welfare: f64,
    pub mean_utility: f64,
    pub mean_cost: f64,
    pub mean_payments: f64,
    pub mean_admitted: f64,
    pub mean_solar_utilization: f64,
    pub min_welfare: f64,
    pub total_welfare: f64,
}

impl Aggregate {
    pub fn of(days: &[DayMetrics]) -> Self {
        let n = days.len().max(1) as f64;
        let sum = |f: fn(&DayMetrics) -> f64| days.iter().map(f).sum::<f64>();
        Self {
            days: days.len(),
            mean_welfare: sum(|d| d.welfare) / n,
            mean_utility: sum(|d| d.total_utility) / n,
            mean_cost: sum(|d| d.electricity_cost) / n,
            mean_payments: sum(|d| d.payments) / n,
            mean_admitted: sum(|d| d.admitted as f64) / n,
            mean_solar_utilization: sum(|d| d.solar_utilization) / n,
            min_welfare: if days.is_empty() {
                0.0
            } else {
                days.iter().map(|d| d.welfare).fold(f64::INFINITY, f64::min)
            },
            total_welfare: sum(|d| d.welfare),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ExperimentReport {
    pub config: String,
    pub mode: Mode,
    pub forecast: ForecastKind,
    pub seeds: Vec<u64>,
    pub days: Vec<DayMetrics>,
    #[serde(skip)]
    pub slots: Vec<SlotMetrics>,
    pub aggregate: Aggregate,
    /// Offline over mechanism welfare, summed over days (offline mode only).
    pub empirical_ratio: Option<f64>,
    /// Largest violation of the accounting identities over all days.
    pub accounting_gap: f64,
}

/// A seeded day ready to run.
#[derive(Debug, Clone)]
pub struct SeededDay {
    pub seed: u64,
    pub trace: DayTrace,
}

/// The scenario days of every seed, in (seed, day) order, with the
/// configured departure buffer applied.
pub fn scenario_days(
    params: &ScenarioParams,
    facilities: &[FacilityConfig],
    config: &Config,
    seeds: &[u64],
) -> Result<Vec<SeededDay>, ScenarioError> {
    let grid = config.time_grid();
    let traces: Vec<_> = seeds
        .par_iter()
        .map(|&seed| {
            let trace = sample_scenario(&ScenarioParams { seed, ..params.clone() }, facilities, grid)?;
            Ok(match config.buffer_slots {
                0 => trace,
                b => buffer_transform(&trace, b, grid),
            })
        })
        .collect::<Result<_, ScenarioError>>()?;
    Ok(seeds
        .iter()
        .zip(traces)
        .flat_map(|(&seed, t)| t.days.into_iter().map(move |trace| SeededDay { seed, trace }))
        .collect())
}

/// Days of an imported trace, labelled with `seed`.
pub fn trace_days(trace: ScenarioTrace, seed: u64) -> Vec<SeededDay> {
    trace.days.into_iter().map(|trace| SeededDay { seed, trace }).collect()
}

/// Runs every seed's scenario with the configured facilities.
pub fn run_experiment(config: &Config, mode: Mode, seeds: &[u64]) -> Result<ExperimentReport, ExperimentError> {
    let facilities = config.facilities();
    let days = scenario_days(&config.scenario, &facilities, config, seeds)?;
    run_days(config, &facilities, mode, seeds, &days)
}

/// Runs `mode` over prepared days; facilities may differ from the config's.
pub fn run_days(
    config: &Config,
    facilities: &[FacilityConfig],
    mode: Mode,
    seeds: &[u64],
    days: &[SeededDay],
) -> Result<ExperimentReport, ExperimentError> {
    let expected = match mode {
        Mode::Cec => expected_arrivals(
            &config.scenario,
            facilities,
            config.time_grid(),
            config.cec.expected_sample_days,
            EXPECTED_ID_BASE,
        )?,
        _ => Vec::new(),
    };
    let results: Vec<(DayMetrics, Vec<SlotMetrics>, Option<f64>)> = days
        .par_iter()
        .map(|d| run_day(config, facilities, mode, d, &expected))
        .collect::<Result<_, _>>()?;
    let mut report_days = Vec::with_capacity(results.len());
    let mut slots = Vec::new();
    let mut mechanism_total = 0.0;
    for (m, s, mech) in results {
        mechanism_total += mech.unwrap_or(0.0);
        report_days.push(m);
        slots.extend(s);
    }
    let aggregate = Aggregate::of(&report_days);
    let empirical_ratio = (mode == Mode::Offline).then(|| empirical_ratio(aggregate.total_welfare, mechanism_total));
    let accounting_gap = report_days.iter().map(DayMetrics::accounting_gap).fold(0.0, f64::max);
    Ok(ExperimentReport {
        config: config.name.clone(),
        mode,
        forecast: config.mechanism.forecast,
        seeds: seeds.to_vec(),
        days: report_days,
        slots,
        aggregate,
        empirical_ratio,
        accounting_gap,
    })
}

fn forecast_mode(config: &Config, instance: &Instance) -> Result<ForecastMode, ScenarioError> {
    Ok(match config.mechanism.forecast {
        ForecastKind::Perfect => ForecastMode::Perfect,
        ForecastKind::Interval => ForecastMode::Interval(
            instance
                .facilities()
                .iter()
                .map(|f| {
                    make_forecast(
                        &f.solar,
                        f.solar_rating,
                        linear_widths(f.solar_rating, config.mechanism.forecast_width, instance.horizon()),
                    )
                })
                .collect::<Result<_, _>>()?,
        ),
    })
}

fn run_mechanism(config: &Config, instance: &Instance, seed: u64, day: usize) -> Result<RunOutcome, ExperimentError> {
    let levels = config.mechanism.levels();
    let bounds = config.bounds.build(instance.facilities());
    if config.bounds.check_scenario && !instance.users().is_empty() {
        compute_bounds_for_levels(instance.users(), instance.facilities(), levels)
            .and_then(|realized| bounds.check_covers(&realized))
            .map_err(|source| ExperimentError::Bounds { seed, day, source })?;
    }
    Ok(run_sequence(
        instance,
        &bounds,
        levels,
        forecast_mode(config, instance)?,
    )?)
}

fn offline_outcome(
    instance: &Instance,
    assignment: &[(UserId, ScheduleOption)],
) -> Result<RunOutcome, AllocationError> {
    let mut state = AllocationState::new(instance);
    let mut decisions = Vec::with_capacity(instance.users().len());
    for u in instance.users() {
        match assignment.iter().find(|(id, _)| *id == u.id) {
            Some((_, o)) => {
                state.commit(instance, u.id, o.clone(), 0.0)?;
                decisions.push(Decision {
                    user: u.id,
                    utility: u.valuation(o.facility).unwrap_or(0.0),
                    option: Some(o.clone()),
                    payment: Some(0.0),
                });
            }
            None => decisions.push(Decision::rejected(u.id)),
        }
    }
    let summary = WelfareSummary::compute(instance, &state, &decisions);
    Ok(RunOutcome {
        procurement_revenue: vec![vec![0.0; instance.horizon()]; instance.facilities().len()],
        state,
        decisions,
        summary,
    })
}

fn run_day(
    config: &Config,
    facilities: &[FacilityConfig],
    mode: Mode,
    day: &SeededDay,
    expected: &[UserRequest],
) -> Result<(DayMetrics, Vec<SlotMetrics>, Option<f64>), ExperimentError> {
    let (seed, d) = (day.seed, day.trace.day);
    let instance = day
        .trace
        .instance(facilities, config.time_grid())
        .map_err(ScenarioError::from)?;
    let mut mechanism_welfare = None;
    let outcome = match mode {
        Mode::Mechanism => run_mechanism(config, &instance, seed, d)?,
        Mode::Fcfs => run_fcfs(&instance, config.fcfs.partial)?,
        Mode::Cec => run_cec(&instance, expected.to_vec(), config.cec.controller)?,
        Mode::Offline => {
            let solution = solve_offline(&instance, config.mechanism.levels(), &config.oracle)?;
            mechanism_welfare = Some(run_mechanism(config, &instance, seed, d)?.summary.welfare);
            offline_outcome(&instance, &solution.assignment)?
        }
    };
    let problems = outcome.state.check_invariants(&instance);
    if !problems.is_empty() {
        return Err(ExperimentError::Invariant { seed, day: d, problems });
    }
    let mut slots = Vec::new();
    for (fi, f) in instance.facilities().iter().enumerate() {
        for t in 0..instance.horizon() {
            let y = outcome.state.procurement_demand(fi, t);
            let used = f64::from(y).min(f.solar[t]);
            slots.push(SlotMetrics {
                mode,
                seed,
                day: d,
                facility: f.id.0,
                slot: t,
                solar: f.solar[t],
                demand: y,
                solar_used: used,
                grid_energy: f64::from(y) - used,
            });
        }
    }
    Ok((
        DayMetrics::new(mode, seed, d, &outcome.summary),
        slots,
        mechanism_welfare,
    ))
}

/// `first..first + count`.
pub fn seed_range(first: u64, count: usize) -> Vec<u64> {
    (0..count as u64).map(|k| first + k).collect()
}

pub fn write_days_csv<W: Write>(days: &[DayMetrics], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for d in days {
        w.serialize(d)?;
    }
    w.flush()?;
    Ok(())
}

pub fn write_slots_csv<W: Write>(slots: &[SlotMetrics], out: W) -> Result<(), csv::Error> {
    let mut w = csv::Writer::from_writer(out);
    for s in slots {
        w.serialize(s)?;
    }
    w.flush()?;
    Ok(())
}

/// Writes `daily.csv`, `slots.csv` and `report.json` for each report into `dir`.
///
/// With several reports the files are concatenated in report order.
pub fn write_reports(reports: &[ExperimentReport], dir: &Path) -> Result<(), ExperimentError> {
    std::fs::create_dir_all(dir)?;
    let days: Vec<DayMetrics> = reports.iter().flat_map(|r| r.days.iter().cloned()).collect();
    let slots: Vec<SlotMetrics> = reports.iter().flat_map(|r| r.slots.iter().cloned()).collect();
    write_days_csv(&days, std::fs::File::create(dir.join("daily.csv"))?)?;
    write_slots_csv(&slots, std::fs::File::create(dir.join("slots.csv"))?)?;
    let mut f = std::fs::File::create(dir.join("report.json"))?;
    serde_json::to_writer_pretty(&mut f, reports)?;
    f.write_all(b"\n")?;
    Ok(())
}
