//! Empirical check of the competitive-ratio and duality guarantees on random
//! small instances solved exactly.

use std::time::Instant;

use parkcharge_core::mechanism::{run_sequence, ForecastMode, MechanismError};
use parkcharge_core::model::{FacilityConfig, LevelSet, TimeGrid, UserRequest};
use parkcharge_core::oracle::{
    empirical_ratio, evaluate_dual, feasible_at_arrival, option_universe, solve_offline, DualPrices, OracleError,
    OracleLimits,
};
use parkcharge_core::pricing::{ratio_bounds, PricingError, SolarForecast, ValuationBounds};
use parkcharge_core::scenarios::{random_small_instance, SmallInstanceSpec};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::config::VerifySpec;

#[derive(Debug, thiserror::Error)]
pub enum VerifyError {
    #[error("seed {seed}")]
    Pricing { seed: u64, source: PricingError },
    #[error("seed {seed}")]
    Mechanism { seed: u64, source: MechanismError },
    #[error("seed {seed}")]
    Oracle { seed: u64, source: OracleError },
}

/// Everything needed to rerun one instance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ReplayCase {
    pub seed: u64,
    pub caps: SmallInstanceSpec,
    pub grid: TimeGrid,
    pub facilities: Vec<FacilityConfig>,
    pub users: Vec<UserRequest>,
    pub bounds: ValuationBounds,
    pub levels: LevelSet,
    pub forecasts: Vec<SolarForecast>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct InstanceResult {
    pub seed: u64,
    pub users: usize,
    pub alpha_1: f64,
    pub alpha_2: f64,
    pub alpha_3: Option<f64>,
    pub offline: f64,
    pub online: f64,
    pub online_interval: f64,
    pub ratio: f64,
    pub ratio_interval: f64,
    /// Final procurement stays below solar in every slot with demand.
    pub under_solar: bool,
    pub dual_objective: f64,
    pub constraint_violations: usize,
    /// Violations among options that fit the headroom at the user's arrival.
    pub constraint_violations_at_arrival: usize,
    pub options_checked: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Failure {
    pub seed: u64,
    pub check: String,
    pub detail: String,
    pub replay: ReplayCase,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct VerifyReport {
    pub instances: usize,
    pub alpha_1_violations: usize,
    pub alpha_2_checked: usize,
    pub alpha_2_violations: usize,
    pub alpha_3_checked: usize,
    pub alpha_3_violations: usize,
    pub offline_below_online: usize,
    pub weak_duality_violations: usize,
    /// Instances with some option violating the dual constraint.
    pub constraint_violations: usize,
    pub constraint_violations_at_arrival: usize,
    pub max_ratio: f64,
    /// Largest `ratio / alpha_1`; below 1 means every instance had slack.
    pub max_ratio_over_alpha_1: f64,
    pub failures: Vec<Failure>,
    pub results: Vec<InstanceResult>,
    /// Wall-clock seconds of the slowest offline solve; not serialized so
    /// reports stay reproducible.
    #[serde(skip)]
    pub slowest_oracle_seconds: f64,
}

impl VerifyReport {
    pub fn ratio_ok(&self) -> bool {
        self.alpha_1_violations == 0
            && self.alpha_2_violations == 0
            && self.alpha_3_violations == 0
            && self.offline_below_online == 0
    }

    pub fn duality_ok(&self) -> bool {
        self.weak_duality_violations == 0 && self.constraint_violations == 0
    }

    pub fn passed(&self) -> bool {
        self.ratio_ok() && self.duality_ok()
    }
}

const TOL: f64 = 1e-9;

struct Checked {
    result: InstanceResult,
    failures: Vec<Failure>,
    oracle_seconds: f64,
}

fn check_instance(caps: &SmallInstanceSpec, limits: &OracleLimits, seed: u64) -> Result<Checked, VerifyError> {
    let si = random_small_instance(caps, seed);
    let inst = &si.instance;
    let facilities = inst.facilities();
    let rb = ratio_bounds(facilities, &si.bounds, Some(&si.forecasts))
        .map_err(|source| VerifyError::Pricing { seed, source })?;
    let mech = |mode| {
        run_sequence(inst, &si.bounds, si.levels, mode).map_err(|source| VerifyError::Mechanism { seed, source })
    };
    let online = mech(ForecastMode::Perfect)?;
    let interval = mech(ForecastMode::Interval(si.forecasts.clone()))?;
    let started = Instant::now();
    let offline = solve_offline(inst, si.levels, limits).map_err(|source| VerifyError::Oracle { seed, source })?;
    let oracle_seconds = started.elapsed().as_secs_f64();

    let under_solar = facilities.iter().enumerate().all(|(fi, f)| {
        (0..inst.horizon()).all(|t| {
            let y = f64::from(online.state.procurement_demand(fi, t));
            y == 0.0 || y < f.solar[t]
        })
    });
    let ratio = empirical_ratio(offline.welfare, online.summary.welfare);
    let ratio_interval = empirical_ratio(offline.welfare, interval.summary.welfare);

    let prices = DualPrices::at_state(inst, &online.state, &si.bounds)
        .map_err(|source| VerifyError::Pricing { seed, source })?;
    let utilities: Vec<f64> = online.decisions.iter().map(|d| d.utility).collect();
    let universe = option_universe(inst, inst.users(), si.levels, limits)
        .map_err(|source| VerifyError::Oracle { seed, source })?;
    let dual = evaluate_dual(inst, &prices, &utilities, inst.users(), &universe)
        .map_err(|source| VerifyError::Pricing { seed, source })?;
    let mask = feasible_at_arrival(inst, &online.decisions, &si.bounds, si.levels, &universe);
    let at_arrival = dual.violations.iter().filter(|v| mask[v.user][v.option]).count();

    let result = InstanceResult {
        seed,
        users: inst.users().len(),
        alpha_1: rb.alpha_1,
        alpha_2: rb.alpha_2,
        alpha_3: rb.alpha_3,
        offline: offline.welfare,
        online: online.summary.welfare,
        online_interval: interval.summary.welfare,
        ratio,
        ratio_interval,
        under_solar,
        dual_objective: dual.objective,
        constraint_violations: dual.violations.len(),
        constraint_violations_at_arrival: at_arrival,
        options_checked: dual.checked,
    };

    let mut failures = Vec::new();
    let mut fail = |check: &str, detail: String| {
        failures.push(Failure {
            seed,
            check: check.to_string(),
            detail,
            replay: ReplayCase {
                seed,
                caps: *caps,
                grid: TimeGrid::new(inst.horizon(), 1.0),
                facilities: facilities.to_vec(),
                users: inst.users().to_vec(),
                bounds: si.bounds,
                levels: si.levels,
                forecasts: si.forecasts.clone(),
            },
        })
    };
    if offline.welfare + TOL < online.summary.welfare || offline.welfare + TOL < interval.summary.welfare {
        fail(
            "offline dominance",
            format!(
                "offline {} online {} interval {}",
                offline.welfare, online.summary.welfare, interval.summary.welfare
            ),
        );
    }
    if ratio > rb.alpha_1 + TOL {
        fail("alpha_1", format!("ratio {ratio} > {}", rb.alpha_1));
    }
    if under_solar && ratio > rb.alpha_2 + TOL {
        fail("alpha_2", format!("ratio {ratio} > {}", rb.alpha_2));
    }
    if let Some(a3) = rb.alpha_3 {
        if ratio_interval > a3 + TOL {
            fail("alpha_3", format!("interval ratio {ratio_interval} > {a3}"));
        }
    }
    if dual.objective + TOL < online.summary.welfare {
        fail(
            "weak duality",
            format!("dual {} < online {}", dual.objective, online.summary.welfare),
        );
    }
    if let Some(v) = dual.violations.first() {
        fail(
            "dual constraint",
            format!(
                "{} options violate it ({at_arrival} fit at arrival); first user {} option {} slack {}",
                dual.violations.len(),
                v.user,
                v.option,
                v.slack
            ),
        );
    }
    Ok(Checked {
        result,
        failures,
        oracle_seconds,
    })
}

/// Runs `spec.instances` random instances with seeds from `spec.first_seed`.
pub fn verify_bounds(spec: &VerifySpec, limits: &OracleLimits) -> Result<VerifyReport, VerifyError> {
    let seeds: Vec<u64> = (0..spec.instances as u64).map(|k| spec.first_seed + k).collect();
    let checked: Vec<Checked> = seeds
        .par_iter()
        .map(|&s| check_instance(&spec.caps, limits, s))
        .collect::<Result<_, _>>()?;
    let mut report = VerifyReport {
        instances: checked.len(),
        alpha_1_violations: 0,
        alpha_2_checked: 0,
        alpha_2_violations: 0,
        alpha_3_checked: 0,
        alpha_3_violations: 0,
        offline_below_online: 0,
        weak_duality_violations: 0,
        constraint_violations: 0,
        constraint_violations_at_arrival: 0,
        max_ratio: 0.0,
        max_ratio_over_alpha_1: 0.0,
        failures: Vec::new(),
        results: Vec::new(),
        slowest_oracle_seconds: 0.0,
    };
    for c in checked {
        let r = &c.result;
        report.alpha_2_checked += usize::from(r.under_solar);
        report.alpha_3_checked += usize::from(r.alpha_3.is_some());
        report.constraint_violations += usize::from(r.constraint_violations > 0);
        report.constraint_violations_at_arrival += usize::from(r.constraint_violations_at_arrival > 0);
        report.max_ratio = report.max_ratio.max(r.ratio);
        report.max_ratio_over_alpha_1 = report.max_ratio_over_alpha_1.max(r.ratio / r.alpha_1);
        report.slowest_oracle_seconds = report.slowest_oracle_seconds.max(c.oracle_seconds);
        for f in &c.failures {
            match f.check.as_str() {
                "alpha_1" => report.alpha_1_violations += 1,
                "alpha_2" => report.alpha_2_violations += 1,
                "alpha_3" => report.alpha_3_violations += 1,
                "offline dominance" => report.offline_below_online += 1,
                "weak duality" => report.weak_duality_violations += 1,
                _ => {}
            }
        }
        report.failures.extend(c.failures);
        report.results.push(c.result);
    }
    Ok(report)
}
