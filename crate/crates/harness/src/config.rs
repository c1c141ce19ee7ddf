//! Experiment configuration: one TOML document per experiment.

use std::path::Path;

use parkcharge_core::baselines::{CecConfig, PartialCharge};
use parkcharge_core::model::{FacilityConfig, LevelSet, TimeGrid};
use parkcharge_core::oracle::OracleLimits;
use parkcharge_core::pricing::{ResourceBounds, ValuationBounds};
use parkcharge_core::scenarios::{ScenarioParams, SmallInstanceSpec};
use serde::{Deserialize, Serialize};

pub const SCHEMA_VERSION: u32 = 1;

/// Los Angeles grid tariff, $/kWh.
pub const GRID_PRICE: f64 = 0.127;
/// Transformer capacity per facility, kVA (kWh per hourly slot).
pub const TRANSFORMER_LIMIT: f64 = 75.0;
/// Level-2 charger output per hourly slot, kWh.
pub const EVSE_RATE: u32 = 7;
/// Hardware cost of each cable on a multi-cable charger, $.
pub const PER_CABLE_COST: f64 = 3343.0;
/// Pedestal installation cost per charger, $.
pub const PER_EVSE_INSTALL: f64 = 3308.0;
/// Networking and maintenance per charger, $ per month.
pub const MONTHLY_MAINTENANCE: f64 = 75.0;

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("reading {path}")]
    Io { path: String, source: std::io::Error },
    #[error("parsing {path}")]
    Parse { path: String, source: toml::de::Error },
    #[error("unsupported schema_version {found} (expected {SCHEMA_VERSION})")]
    Schema { found: u32 },
    #[error("invalid configuration: {0}")]
    Invalid(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct GridSpec {
    pub horizon: usize,
    pub slot_hours: f64,
}

impl Default for GridSpec {
    fn default() -> Self {
        Self {
            horizon: 24,
            slot_hours: 1.0,
        }
    }
}

fn default_grid_price() -> f64 {
    GRID_PRICE
}

fn default_transformer() -> f64 {
    TRANSFORMER_LIMIT
}

fn default_rate() -> u32 {
    EVSE_RATE
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FacilitySpec {
    pub id: u32,
    pub evse_count: usize,
    pub cables_per_evse: u32,
    #[serde(default = "default_rate")]
    pub evse_max_energy: u32,
    #[serde(default = "default_transformer")]
    pub transformer_limit: f64,
    /// Rooftop system size, kW.
    #[serde(default)]
    pub solar_kw: f64,
    #[serde(default = "default_grid_price")]
    pub grid_price: f64,
}

impl FacilitySpec {
    /// Facility with a zero solar series; daily curves come from the scenario.
    pub fn build(&self, grid: TimeGrid) -> FacilityConfig {
        FacilityConfig::uniform(
            self.id,
            self.evse_count,
            self.cables_per_evse,
            self.evse_max_energy,
            grid.horizon,
            self.transformer_limit,
            self.grid_price,
        )
        .with_solar(vec![0.0; grid.horizon], self.solar_kw * grid.slot_hours)
    }
}

/// Configured valuation bounds per resource.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct BoundsSpec {
    pub cable: ResourceBounds,
    pub energy: ResourceBounds,
    pub procurement: ResourceBounds,
    /// Abort when a day's realized upper bounds exceed the configured ones.
    #[serde(default = "yes")]
    pub check_scenario: bool,
}

fn yes() -> bool {
    true
}

impl BoundsSpec {
    pub fn build(&self, facilities: &[FacilityConfig]) -> ValuationBounds {
        ValuationBounds::new(self.cable, self.energy, self.procurement, facilities)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "kebab-case")]
pub enum ForecastKind {
    #[default]
    Perfect,
    Interval,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct MechanismSpec {
    /// Largest per-slot charge level; unlimited when absent.
    #[serde(default)]
    pub max_level: Option<u32>,
    #[serde(default)]
    pub forecast: ForecastKind,
    /// Forecast half-width per slot of lead, as a fraction of the solar rating.
    #[serde(default = "default_width")]
    pub forecast_width: f64,
}

fn default_width() -> f64 {
    0.02
}

impl Default for MechanismSpec {
    fn default() -> Self {
        Self {
            max_level: None,
            forecast: ForecastKind::Perfect,
            forecast_width: default_width(),
        }
    }
}

impl MechanismSpec {
    pub fn levels(&self) -> LevelSet {
        self.max_level.map_or(LevelSet::unrestricted(), LevelSet::up_to)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FcfsSpec {
    #[serde(default)]
    pub partial: PartialCharge,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct CecSpec {
    #[serde(default)]
    pub controller: CecConfig,
    /// Days sampled to build the expected-arrival trace.
    #[serde(default = "default_expected_days")]
    pub expected_sample_days: usize,
}

fn default_expected_days() -> usize {
    200
}

impl Default for CecSpec {
    fn default() -> Self {
        Self {
            controller: CecConfig::default(),
            expected_sample_days: default_expected_days(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct InvestmentSpec {
    #[serde(default = "default_cable_cost")]
    pub per_cable_cost: f64,
    #[serde(default = "default_install")]
    pub per_evse_install: f64,
    #[serde(default = "default_maintenance")]
    pub monthly_maintenance: f64,
    /// Months of maintenance charged.
    pub months: u32,
    /// Operating days the welfare is accumulated over.
    pub operating_days: usize,
    /// Days actually simulated per configuration; the mean daily welfare is
    /// scaled up to `operating_days`.
    pub simulated_days: usize,
    pub evse_counts: Vec<usize>,
    pub cable_counts: Vec<u32>,
}

fn default_cable_cost() -> f64 {
    PER_CABLE_COST
}

fn default_install() -> f64 {
    PER_EVSE_INSTALL
}

fn default_maintenance() -> f64 {
    MONTHLY_MAINTENANCE
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct VerifySpec {
    pub instances: usize,
    #[serde(default)]
    pub first_seed: u64,
    #[serde(default)]
    pub caps: SmallInstanceSpec,
}

impl Default for VerifySpec {
    fn default() -> Self {
        Self {
            instances: 200,
            first_seed: 0,
            caps: SmallInstanceSpec::default(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Config {
    pub schema_version: u32,
    pub name: String,
    #[serde(default)]
    pub grid: GridSpec,
    pub facilities: Vec<FacilitySpec>,
    pub scenario: ScenarioParams,
    pub bounds: BoundsSpec,
    /// Slots added to every reported departure.
    #[serde(default)]
    pub buffer_slots: usize,
    #[serde(default)]
    pub mechanism: MechanismSpec,
    #[serde(default)]
    pub fcfs: FcfsSpec,
    #[serde(default)]
    pub cec: CecSpec,
    #[serde(default)]
    pub oracle: OracleLimits,
    #[serde(default)]
    pub investment: Option<InvestmentSpec>,
    #[serde(default)]
    pub verify: VerifySpec,
}

impl Config {
    pub fn from_toml(text: &str, path: &str) -> Result<Self, ConfigError> {
        let config: Config = toml::from_str(text).map_err(|source| ConfigError::Parse {
            path: path.to_string(),
            source,
        })?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let shown = path.display().to_string();
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: shown.clone(),
            source,
        })?;
        Self::from_toml(&text, &shown)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("configuration serializes")
    }

    pub fn time_grid(&self) -> TimeGrid {
        TimeGrid::new(self.grid.horizon, self.grid.slot_hours)
    }

    pub fn facilities(&self) -> Vec<FacilityConfig> {
        let grid = self.time_grid();
        self.facilities.iter().map(|f| f.build(grid)).collect()
    }

    pub fn valuation_bounds(&self) -> ValuationBounds {
        self.bounds.build(&self.facilities())
    }

    pub fn check(&self) -> Result<(), ConfigError> {
        if self.schema_version != SCHEMA_VERSION {
            return Err(ConfigError::Schema {
                found: self.schema_version,
            });
        }
        let invalid = |m: String| Err(ConfigError::Invalid(m));
        if self.grid.horizon == 0 || self.grid.slot_hours.is_nan() || self.grid.slot_hours <= 0.0 {
            return invalid(format!("bad time grid {:?}", self.grid));
        }
        if self.facilities.is_empty() {
            return invalid("no facilities".into());
        }
        let mut ids: Vec<u32> = self.facilities.iter().map(|f| f.id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.facilities.len() {
            return invalid("duplicate facility ids".into());
        }
        for f in &self.facilities {
            if f.evse_count == 0 || f.cables_per_evse == 0 || f.evse_max_energy == 0 {
                return invalid(format!("facility {} needs chargers, cables and a charging rate", f.id));
            }
            if f.transformer_limit < 0.0 || f.solar_kw < 0.0 || f.grid_price.is_nan() || f.grid_price <= 0.0 {
                return invalid(format!("facility {} has a negative limit or non-positive tariff", f.id));
            }
        }
        let facilities = self.facilities();
        self.scenario
            .check(&facilities, self.time_grid())
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        self.valuation_bounds()
            .check(&facilities)
            .map_err(|e| ConfigError::Invalid(e.to_string()))?;
        if let Some(level) = self.mechanism.max_level {
            if self.facilities.iter().any(|f| f.evse_max_energy > level) {
                return invalid(format!(
                    "max_level {level} is below a charger rate; sampled requests sized to the rate could not be scheduled"
                ));
            }
        }
        if self.mechanism.forecast_width.is_nan() || self.mechanism.forecast_width < 0.0 {
            return invalid("forecast_width must be non-negative".into());
        }
        if let Some(inv) = &self.investment {
            if inv.evse_counts.is_empty() || inv.cable_counts.is_empty() {
                return invalid("investment grid is empty".into());
            }
            if inv.evse_counts.contains(&0) || inv.cable_counts.contains(&0) {
                return invalid("investment grid needs at least one charger and one cable".into());
            }
            if inv.per_cable_cost < 0.0 || inv.per_evse_install < 0.0 || inv.monthly_maintenance < 0.0 {
                return invalid("investment costs must be non-negative".into());
            }
            if inv.simulated_days == 0 && inv.operating_days > 0 {
                return invalid("simulated_days must be positive".into());
            }
        }
        Ok(())
    }
}
