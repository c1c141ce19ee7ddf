//! Seeded arrival traces, synthetic solar curves, interval forecasts, the
//! departure-buffer transform and CSV import/export.
//!
//! Integer quantities (arrival slot, stay, energy) are drawn from discrete
//! distributions over an inclusive range, so their exact CDF is available for
//! goodness-of-fit checks. Valuations are continuous and drawn by inverting a
//! truncated CDF. Every day has its own ChaCha stream derived from the seed.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::index::sample as sample_indices;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use statrs::distribution::{ContinuousCDF, Normal};
use thiserror::Error;

use crate::model::{FacilityConfig, FacilityId, Instance, TimeGrid, UserId, UserRequest, ValidationReport};
use crate::pricing::{PricingError, SolarForecast};

#[derive(Debug, Error)]
pub enum ScenarioError {
    #[error("invalid scenario parameters: {0}")]
    Params(String),
    #[error(transparent)]
    Csv(#[from] csv::Error),
    #[error("malformed row {row}: {reason}")]
    Row { row: usize, reason: String },
    #[error(transparent)]
    Instance(#[from] ValidationReport),
    #[error(transparent)]
    Forecast(#[from] PricingError),
}

fn params_error(msg: impl Into<String>) -> ScenarioError {
    ScenarioError::Params(msg.into())
}

/// Shape of a distribution before truncation to its range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize, Default)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum Shape {
    #[default]
    Uniform,
    Normal {
        mean: f64,
        sd: f64,
    },
    /// Mixture of two normals; `weight` is the first component's share.
    Bimodal {
        weight: f64,
        first_mean: f64,
        first_sd: f64,
        second_mean: f64,
        second_sd: f64,
    },
}

impl Shape {
    fn check(&self) -> Result<(), ScenarioError> {
        let sd_ok = |sd: f64| sd > 0.0 && sd.is_finite();
        match *self {
            Shape::Uniform => Ok(()),
            Shape::Normal { sd, .. } if sd_ok(sd) => Ok(()),
            Shape::Bimodal {
                weight,
                first_sd,
                second_sd,
                ..
            } if (0.0..=1.0).contains(&weight) && sd_ok(first_sd) && sd_ok(second_sd) => Ok(()),
            _ => Err(params_error(format!("bad distribution shape {self:?}"))),
        }
    }

    /// Untruncated CDF; `None` for the uniform shape.
    fn cdf(&self, x: f64) -> Option<f64> {
        let normal = |m: f64, s: f64| Normal::new(m, s).expect("checked shape").cdf(x);
        match *self {
            Shape::Uniform => None,
            Shape::Normal { mean, sd } => Some(normal(mean, sd)),
            Shape::Bimodal {
                weight,
                first_mean,
                first_sd,
                second_mean,
                second_sd,
            } => Some(weight * normal(first_mean, first_sd) + (1.0 - weight) * normal(second_mean, second_sd)),
        }
    }
}

/// Integer quantity on `min..=max`; each value `k` gets the shape's mass on
/// `[k - 0.5, k + 0.5)`, renormalized over the range.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IntDist {
    pub min: u32,
    pub max: u32,
    #[serde(default)]
    pub shape: Shape,
}

impl IntDist {
    pub fn uniform(min: u32, max: u32) -> Self {
        Self {
            min,
            max,
            shape: Shape::Uniform,
        }
    }

    pub fn check(&self, name: &str) -> Result<(), ScenarioError> {
        if self.min > self.max {
            return Err(params_error(format!("{name}: empty range {}..={}", self.min, self.max)));
        }
        self.shape.check()?;
        if self.pmf().iter().sum::<f64>() <= 0.0 || self.pmf().iter().any(|p| !p.is_finite()) {
            return Err(params_error(format!("{name}: shape puts no mass on the range")));
        }
        Ok(())
    }

    /// Probabilities of `min, min + 1, ..., max`.
    pub fn pmf(&self) -> Vec<f64> {
        let raw: Vec<f64> = (self.min..=self.max)
            .map(|k| match self.shape.cdf(f64::from(k) + 0.5) {
                None => 1.0,
                Some(hi) => hi - self.shape.cdf(f64::from(k) - 0.5).expect("same shape"),
            })
            .collect();
        let total: f64 = raw.iter().sum();
        raw.into_iter().map(|p| p / total).collect()
    }

    /// `P(X <= x)`.
    pub fn cdf(&self, x: f64) -> f64 {
        let mut acc = 0.0;
        for (k, p) in (self.min..=self.max).zip(self.pmf()) {
            if f64::from(k) > x {
                break;
            }
            acc += p;
        }
        acc.min(1.0)
    }

    pub fn mean(&self) -> f64 {
        (self.min..=self.max)
            .zip(self.pmf())
            .map(|(k, p)| f64::from(k) * p)
            .sum()
    }

    fn sampler(&self) -> DiscreteSampler {
        let mut cumulative = Vec::new();
        let mut acc = 0.0;
        for p in self.pmf() {
            acc += p;
            cumulative.push(acc);
        }
        DiscreteSampler {
            min: self.min,
            cumulative,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        self.sampler().sample(rng)
    }
}

struct DiscreteSampler {
    min: u32,
    cumulative: Vec<f64>,
}

impl DiscreteSampler {
    fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let u: f64 = rng.random::<f64>() * self.cumulative.last().copied().unwrap_or(1.0);
        let i = self.cumulative.partition_point(|&c| c <= u);
        self.min + i.min(self.cumulative.len() - 1) as u32
    }
}

/// Continuous quantity on `[min, max]` with a truncated shape.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RealDist {
    pub min: f64,
    pub max: f64,
    #[serde(default)]
    pub shape: Shape,
}

impl RealDist {
    pub fn uniform(min: f64, max: f64) -> Self {
        Self {
            min,
            max,
            shape: Shape::Uniform,
        }
    }

    pub fn check(&self, name: &str) -> Result<(), ScenarioError> {
        if !(self.min < self.max && self.min.is_finite() && self.max.is_finite()) {
            return Err(params_error(format!(
                "{name}: empty range [{}, {}]",
                self.min, self.max
            )));
        }
        self.shape.check()?;
        if let (Some(a), Some(b)) = (self.shape.cdf(self.min), self.shape.cdf(self.max)) {
            if b - a <= 1e-12 {
                return Err(params_error(format!("{name}: shape puts no mass on the range")));
            }
        }
        Ok(())
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.min {
            return 0.0;
        }
        if x >= self.max {
            return 1.0;
        }
        match (self.shape.cdf(x), self.shape.cdf(self.min), self.shape.cdf(self.max)) {
            (Some(f), Some(a), Some(b)) => (f - a) / (b - a),
            _ => (x - self.min) / (self.max - self.min),
        }
    }

    /// Inverse CDF by bisection (exact for the uniform shape).
    pub fn quantile(&self, u: f64) -> f64 {
        if matches!(self.shape, Shape::Uniform) {
            return self.min + u * (self.max - self.min);
        }
        let (mut lo, mut hi) = (self.min, self.max);
        for _ in 0..100 {
            let mid = 0.5 * (lo + hi);
            if self.cdf(mid) < u {
                lo = mid;
            } else {
                hi = mid;
            }
        }
        0.5 * (lo + hi)
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> f64 {
        self.quantile(rng.random::<f64>())
    }
}

/// Daily arrival count.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "kebab-case")]
pub enum CountDist {
    Fixed {
        count: u32,
    },
    /// Rounded and clipped at zero.
    Normal {
        mean: f64,
        sd: f64,
    },
    Bimodal {
        weight: f64,
        first_mean: f64,
        first_sd: f64,
        second_mean: f64,
        second_sd: f64,
    },
}

impl CountDist {
    fn check(&self) -> Result<(), ScenarioError> {
        match *self {
            CountDist::Fixed { .. } => Ok(()),
            CountDist::Normal { mean, sd } => Shape::Normal { mean, sd }.check(),
            CountDist::Bimodal {
                weight,
                first_mean,
                first_sd,
                second_mean,
                second_sd,
            } => Shape::Bimodal {
                weight,
                first_mean,
                first_sd,
                second_mean,
                second_sd,
            }
            .check(),
        }
    }

    pub fn mean(&self) -> f64 {
        match *self {
            CountDist::Fixed { count } => f64::from(count),
            CountDist::Normal { mean, .. } => mean,
            CountDist::Bimodal {
                weight,
                first_mean,
                second_mean,
                ..
            } => weight * first_mean + (1.0 - weight) * second_mean,
        }
    }

    pub fn sample<R: Rng>(&self, rng: &mut R) -> u32 {
        let normal = |rng: &mut R, m: f64, s: f64| {
            let u: f64 = rng.random::<f64>().clamp(1e-12, 1.0 - 1e-12);
            Normal::new(m, s).expect("checked count").inverse_cdf(u)
        };
        let x = match *self {
            CountDist::Fixed { count } => return count,
            CountDist::Normal { mean, sd } => normal(rng, mean, sd),
            CountDist::Bimodal {
                weight,
                first_mean,
                first_sd,
                second_mean,
                second_sd,
            } => {
                if rng.random::<f64>() < weight {
                    normal(rng, first_mean, first_sd)
                } else {
                    normal(rng, second_mean, second_sd)
                }
            }
        };
        x.round().max(0.0) as u32
    }
}

/// How many and which facilities a user would accept.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PreferenceSpec {
    pub min_size: usize,
    pub max_size: usize,
    /// Per-facility valuations are the base draw times `1 + jitter * U(-1, 1)`.
    #[serde(default)]
    pub valuation_jitter: f64,
}

impl Default for PreferenceSpec {
    fn default() -> Self {
        Self {
            min_size: 1,
            max_size: 1,
            valuation_jitter: 0.0,
        }
    }
}

/// Clipped-sine daylight curve.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SolarSpec {
    /// Hour of day at which production starts.
    pub sunrise: f64,
    pub sunset: f64,
    /// Fraction lost to shading, wiring and the like.
    pub system_loss: f64,
    /// Daily clearness factor drawn uniformly from this range.
    pub clearness_min: f64,
    pub clearness_max: f64,
}

impl Default for SolarSpec {
    fn default() -> Self {
        // a clear winter day
        Self {
            sunrise: 7.0,
            sunset: 17.0,
            system_loss: 0.14,
            clearness_min: 0.8,
            clearness_max: 1.0,
        }
    }
}

impl SolarSpec {
    /// Energy per slot of a system rated `rating_kw` under `clearness`.
    pub fn curve(&self, grid: TimeGrid, rating_kw: f64, clearness: f64) -> Vec<f64> {
        grid.slots()
            .map(|t| {
                let hour = (t as f64 + 0.5) * grid.slot_hours;
                if hour <= self.sunrise || hour >= self.sunset {
                    return 0.0;
                }
                let phase = std::f64::consts::PI * (hour - self.sunrise) / (self.sunset - self.sunrise);
                (rating_kw * grid.slot_hours * (1.0 - self.system_loss) * clearness * phase.sin()).max(0.0)
            })
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioParams {
    pub days: usize,
    pub seed: u64,
    pub arrivals: CountDist,
    /// Arrival slot.
    pub arrival_slot: IntDist,
    /// Stay length in slots.
    pub stay: IntDist,
    /// Departures earlier than this slot are pushed back to it.
    #[serde(default)]
    pub min_departure_slot: Option<usize>,
    /// Requested energy in units; capped so the request fits the stay.
    pub energy: IntDist,
    pub valuation: RealDist,
    #[serde(default)]
    pub preferences: PreferenceSpec,
    #[serde(default)]
    pub solar: SolarSpec,
}

impl ScenarioParams {
    pub fn check(&self, facilities: &[FacilityConfig], grid: TimeGrid) -> Result<(), ScenarioError> {
        self.arrivals.check()?;
        self.arrival_slot.check("arrival slot")?;
        self.stay.check("stay")?;
        self.energy.check("energy")?;
        self.valuation.check("valuation")?;
        if self.valuation.min <= 0.0 {
            return Err(params_error("valuations must be positive"));
        }
        if self.stay.min == 0 || self.energy.min == 0 {
            return Err(params_error("stays and energy requests must be at least 1"));
        }
        if self.stay.max as usize > grid.horizon {
            return Err(params_error(format!(
                "stay of {} slots exceeds the {}-slot horizon",
                self.stay.max, grid.horizon
            )));
        }
        if self.arrival_slot.max as usize >= grid.horizon {
            return Err(params_error("arrival window extends past the horizon"));
        }
        if self.min_departure_slot.is_some_and(|d| d >= grid.horizon) {
            return Err(params_error("minimum departure slot past the horizon"));
        }
        let p = self.preferences;
        if p.min_size == 0 || p.min_size > p.max_size || p.max_size > facilities.len() {
            return Err(params_error(format!(
                "preference set size {}..={} with {} facilities",
                p.min_size,
                p.max_size,
                facilities.len()
            )));
        }
        if !(0.0..1.0).contains(&p.valuation_jitter) {
            return Err(params_error("valuation jitter must be in [0, 1)"));
        }
        let s = self.solar;
        if !(s.sunrise < s.sunset
            && (0.0..1.0).contains(&s.system_loss)
            && 0.0 <= s.clearness_min
            && s.clearness_min <= s.clearness_max
            && s.clearness_max <= 1.0)
        {
            return Err(params_error("invalid solar curve"));
        }
        Ok(())
    }
}

/// One simulated day: arrivals in submission order and realized solar per
/// facility (same order as the facility list).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DayTrace {
    pub day: usize,
    pub users: Vec<UserRequest>,
    pub solar: Vec<Vec<f64>>,
}

impl DayTrace {
    /// The facilities with this day's solar, and the day's arrivals.
    pub fn instance(&self, facilities: &[FacilityConfig], grid: TimeGrid) -> Result<Instance, ValidationReport> {
        let fs = facilities
            .iter()
            .zip(&self.solar)
            .map(|(f, s)| FacilityConfig {
                solar: s.clone(),
                ..f.clone()
            })
            .collect();
        Instance::new(grid, fs, self.users.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScenarioTrace {
    pub days: Vec<DayTrace>,
}

/// Per-day RNG: one ChaCha stream per day under the scenario seed.
pub fn day_rng(seed: u64, day: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(day as u64);
    rng
}

/// `facilities[i].solar_rating` is taken as the nameplate output per slot.
fn sample_day(params: &ScenarioParams, facilities: &[FacilityConfig], grid: TimeGrid, day: usize) -> DayTrace {
    let mut rng = day_rng(params.seed, day);
    let clearness =
        params.solar.clearness_min + rng.random::<f64>() * (params.solar.clearness_max - params.solar.clearness_min);
    let solar = facilities
        .iter()
        .map(|f| {
            params
                .solar
                .curve(grid, f.solar_rating / grid.slot_hours, clearness)
                .into_iter()
                .map(|s| s.min(f.solar_rating))
                .collect()
        })
        .collect();

    let count = params.arrivals.sample(&mut rng);
    let arrival = params.arrival_slot.sampler();
    let stay = params.stay.sampler();
    let energy = params.energy.sampler();
    let last = grid.horizon - 1;
    let mut drawn = Vec::with_capacity(count as usize);
    for _ in 0..count {
        let a = arrival.sample(&mut rng) as usize;
        let len = stay.sample(&mut rng) as usize;
        let mut d = (a + len - 1).min(last);
        if let Some(min_d) = params.min_departure_slot {
            d = d.max(min_d);
        }
        let p = params.preferences;
        let size = rng.random_range(p.min_size..=p.max_size);
        let mut chosen: Vec<usize> = sample_indices(&mut rng, facilities.len(), size).into_vec();
        chosen.sort_unstable();
        let base = params.valuation.sample(&mut rng);
        let valuations: BTreeMap<FacilityId, f64> = chosen
            .iter()
            .map(|&i| {
                let jitter = if p.valuation_jitter > 0.0 {
                    1.0 + p.valuation_jitter * (2.0 * rng.random::<f64>() - 1.0)
                } else {
                    1.0
                };
                (facilities[i].id, base * jitter)
            })
            .collect();
        let rate = chosen.iter().map(|&i| facilities[i].evse_max_energy).min().unwrap_or(1);
        let fits = (d + 1 - a) as u32 * rate;
        let h = energy.sample(&mut rng).min(fits).max(1);
        drawn.push((a, d, h, valuations));
    }
    drawn.sort_by_key(|x| x.0);
    let users = drawn
        .into_iter()
        .enumerate()
        .map(|(i, (a, d, h, valuations))| UserRequest {
            id: UserId(i as u32 + 1),
            submission_slot: a,
            arrival_slot: a,
            departure_slot: d,
            energy: h,
            valuations,
        })
        .collect();
    DayTrace { day, users, solar }
}

/// Reproducible multi-day trace.
pub fn sample_scenario(
    params: &ScenarioParams,
    facilities: &[FacilityConfig],
    grid: TimeGrid,
) -> Result<ScenarioTrace, ScenarioError> {
    params.check(facilities, grid)?;
    Ok(ScenarioTrace {
        days: (0..params.days)
            .map(|d| sample_day(params, facilities, grid, d))
            .collect(),
    })
}

/// A single day of the scenario, identical to `sample_scenario(..).days[day]`.
pub fn sample_day_trace(
    params: &ScenarioParams,
    facilities: &[FacilityConfig],
    grid: TimeGrid,
    day: usize,
) -> Result<DayTrace, ScenarioError> {
    params.check(facilities, grid)?;
    Ok(sample_day(params, facilities, grid, day))
}

/// Bracket widths growing by `fraction_per_slot * rating` per slot of lead.
pub fn linear_widths(rating: f64, fraction_per_slot: f64, horizon: usize) -> Vec<f64> {
    (0..horizon.max(1))
        .map(|d| rating * fraction_per_slot * d as f64)
        .collect()
}

/// Interval forecast around the realized curve; widths must be non-negative
/// and non-decreasing in lead time, and the zero-lead width is forced to 0.
pub fn make_forecast(realized: &[f64], rating: f64, widths: Vec<f64>) -> Result<SolarForecast, ScenarioError> {
    Ok(SolarForecast::new(realized.to_vec(), rating, widths)?)
}

/// Extends every stay by `buffer` slots, clipped at the last slot.
pub fn buffer_transform(trace: &ScenarioTrace, buffer: usize, grid: TimeGrid) -> ScenarioTrace {
    let last = grid.horizon - 1;
    ScenarioTrace {
        days: trace
            .days
            .iter()
            .map(|d| DayTrace {
                users: d
                    .users
                    .iter()
                    .map(|u| UserRequest {
                        departure_slot: (u.departure_slot + buffer).min(last),
                        ..u.clone()
                    })
                    .collect(),
                ..d.clone()
            })
            .collect(),
    }
}

/// Deterministic expected-arrival trace for planning controllers.
///
/// Draws `sample_days` days from a stream disjoint from the scenario's own
/// days, then for every arrival slot keeps the rounded mean number of
/// arrivals, each with the mean stay, energy and per-facility valuation of
/// that slot's arrivals. Ids start at `first_id`.
pub fn expected_arrivals(
    params: &ScenarioParams,
    facilities: &[FacilityConfig],
    grid: TimeGrid,
    sample_days: usize,
    first_id: u32,
) -> Result<Vec<UserRequest>, ScenarioError> {
    params.check(facilities, grid)?;
    #[derive(Default)]
    struct Acc {
        n: usize,
        stay: f64,
        energy: f64,
        value: BTreeMap<FacilityId, (f64, usize)>,
    }
    let mut per_slot: Vec<Acc> = (0..grid.horizon).map(|_| Acc::default()).collect();
    for k in 0..sample_days {
        let day = sample_day(params, facilities, grid, usize::MAX / 2 + k);
        for u in &day.users {
            let acc = &mut per_slot[u.arrival_slot];
            acc.n += 1;
            acc.stay += u.stay_len() as f64;
            acc.energy += f64::from(u.energy);
            for (&l, &v) in &u.valuations {
                let e = acc.value.entry(l).or_default();
                e.0 += v;
                e.1 += 1;
            }
        }
    }
    let mut out = Vec::new();
    let mut id = first_id;
    for (t, acc) in per_slot.iter().enumerate() {
        let count = (acc.n as f64 / sample_days.max(1) as f64).round() as usize;
        if count == 0 || acc.n == 0 {
            continue;
        }
        let n = acc.n as f64;
        let stay = ((acc.stay / n).round() as usize).max(1);
        let departure = (t + stay - 1).min(grid.horizon - 1);
        let energy = ((acc.energy / n).round() as u32).max(1);
        let valuations: BTreeMap<FacilityId, f64> = acc.value.iter().map(|(&l, &(s, c))| (l, s / c as f64)).collect();
        for _ in 0..count {
            out.push(UserRequest {
                id: UserId(id),
                submission_slot: t,
                arrival_slot: t,
                departure_slot: departure,
                energy,
                valuations: valuations.clone(),
            });
            id += 1;
        }
    }
    Ok(out)
}

/// Kolmogorov-Smirnov distance between a sample and a CDF, evaluated on
/// both sides of every distinct sample value (exact for discrete CDFs too).
pub fn ks_distance(samples: &[f64], cdf: impl Fn(f64) -> f64) -> f64 {
    let mut xs = samples.to_vec();
    xs.sort_by(f64::total_cmp);
    let n = xs.len() as f64;
    let mut d: f64 = 0.0;
    let mut i = 0;
    while i < xs.len() {
        let x = xs[i];
        let below = i as f64 / n;
        let mut j = i;
        while j < xs.len() && xs[j] == x {
            j += 1;
        }
        let at = j as f64 / n;
        let f = cdf(x);
        // left limit of the theoretical CDF at x
        let f_left = cdf(x - 1e-9 * x.abs().max(1.0));
        d = d.max((at - f).abs()).max((below - f_left).abs());
        i = j;
    }
    d
}

/// Size caps for random verification instances.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SmallInstanceSpec {
    pub max_users: usize,
    pub max_evse: usize,
    pub max_cables: u32,
    pub max_energy: u32,
    pub horizon: usize,
    /// Largest charge level per slot; levels are `0..=max_level`.
    pub max_level: u32,
    pub max_stay: usize,
    pub max_solar: u32,
    pub max_transformer: u32,
    pub grid_price: f64,
    /// Per-unit valuations may exceed the largest admissible floor by this factor.
    pub value_spread: f64,
}

impl Default for SmallInstanceSpec {
    fn default() -> Self {
        Self {
            max_users: 8,
            max_evse: 2,
            max_cables: 3,
            max_energy: 3,
            horizon: 6,
            max_level: 2,
            max_stay: 3,
            max_solar: 3,
            max_transformer: 3,
            grid_price: 0.127,
            value_spread: 3.0,
        }
    }
}

/// A random instance with bounds realized from its own valuations.
#[derive(Debug, Clone)]
pub struct SmallInstance {
    pub seed: u64,
    pub instance: Instance,
    pub bounds: crate::pricing::ValuationBounds,
    pub levels: crate::model::LevelSet,
    /// Solar forecasts (one per facility) with random non-decreasing widths.
    pub forecasts: Vec<SolarForecast>,
}

/// Draws a one-facility instance whose realized valuation bounds keep
/// `L_g` above the grid price and satisfy the aggregate-`R` requirement.
/// Resamples valuations until both hold; integer solar and transformer
/// limits keep every capacity a whole number of units.
pub fn random_small_instance(spec: &SmallInstanceSpec, seed: u64) -> SmallInstance {
    use crate::model::LevelSet;
    use crate::pricing::{aggregate_r, compute_bounds_for_levels};
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let grid = TimeGrid::new(spec.horizon, 1.0);
    let m = rng.random_range(1..=spec.max_evse.max(1));
    let c = rng.random_range(1..=spec.max_cables.max(1));
    let e = rng.random_range(1..=spec.max_energy.max(1));
    let g = f64::from(rng.random_range(1..=spec.max_transformer.max(1)));
    let rating = f64::from(spec.max_solar);
    let solar: Vec<f64> = (0..spec.horizon)
        .map(|_| f64::from(rng.random_range(0..=spec.max_solar)))
        .collect();
    let facility =
        FacilityConfig::uniform(1, m, c, e, spec.horizon, g, spec.grid_price).with_solar(solar.clone(), rating);
    let levels = LevelSet::up_to(rng.random_range(1..=spec.max_level.max(1)));
    let level_cap = levels.cap(e);
    let r = aggregate_r(std::slice::from_ref(&facility));
    let pi = spec.grid_price;
    // per-unit floors admissible under the R requirement: (pi, 2 R pi / e]
    let floor_lo = pi * 1.05;
    let floor_hi = (2.0 * r * pi / std::f64::consts::E).max(floor_lo * 1.01);
    let n = rng.random_range(1..=spec.max_users.max(1));
    let mut shape: Vec<(usize, usize, u32)> = (0..n)
        .map(|_| {
            let a = rng.random_range(0..spec.horizon);
            let stay = rng.random_range(1..=spec.max_stay.min(spec.horizon - a));
            let h = rng.random_range(1..=(stay as u32 * level_cap));
            (a, a + stay - 1, h)
        })
        .collect();
    shape.sort_by_key(|x| x.0);
    loop {
        let users: Vec<UserRequest> = shape
            .iter()
            .enumerate()
            .map(|(i, &(a, d, h))| {
                let per_unit = floor_lo + rng.random::<f64>() * (spec.value_spread * floor_hi - floor_lo);
                UserRequest::new(i as u32 + 1, a, d, h, [(1, per_unit * r * f64::from(h))])
            })
            .collect();
        let bounds = compute_bounds_for_levels(&users, std::slice::from_ref(&facility), levels)
            .expect("every generated request fits its stay");
        let ok = bounds.procurement.lower > pi
            && bounds.check(std::slice::from_ref(&facility)).is_ok()
            && bounds.check_r_assumption(std::slice::from_ref(&facility)).is_ok();
        if !ok {
            continue;
        }
        let mut widths = vec![0.0];
        for _ in 1..spec.horizon {
            let last = *widths.last().expect("non-empty");
            widths.push(last + rng.random::<f64>() * rating / spec.horizon as f64);
        }
        let forecast = SolarForecast::new(solar, rating, widths).expect("valid widths");
        let instance = Instance::new(grid, vec![facility], users).expect("generated instance is valid");
        return SmallInstance {
            seed,
            instance,
            bounds,
            levels,
            forecasts: vec![forecast],
        };
    }
}

fn format_valuations(v: &BTreeMap<FacilityId, f64>) -> String {
    v.iter().map(|(l, x)| format!("{l}:{x}")).collect::<Vec<_>>().join(";")
}

fn parse_valuations(s: &str, row: usize) -> Result<BTreeMap<FacilityId, f64>, ScenarioError> {
    let bad = |reason: String| ScenarioError::Row { row, reason };
    s.split(';')
        .filter(|p| !p.trim().is_empty())
        .map(|pair| {
            let (l, v) = pair
                .split_once(':')
                .ok_or_else(|| bad(format!("expected facility:valuation, got {pair:?}")))?;
            let l: u32 = l.trim().parse().map_err(|_| bad(format!("bad facility id {l:?}")))?;
            let v: f64 = v.trim().parse().map_err(|_| bad(format!("bad valuation {v:?}")))?;
            Ok((FacilityId(l), v))
        })
        .collect()
}

#[derive(Debug, Serialize, Deserialize)]
struct RequestRow {
    day: usize,
    id: u32,
    submit: usize,
    arrive: usize,
    depart: usize,
    energy: u32,
    valuations: String,
}

#[derive(Debug, Serialize, Deserialize)]
struct SolarRow {
    day: usize,
    facility: u32,
    slot: usize,
    solar: f64,
}

/// One row per request: `day,id,submit,arrive,depart,energy,valuations`
/// with valuations written as `facility:value` pairs joined by `;`.
pub fn write_requests_csv<W: Write>(trace: &ScenarioTrace, out: W) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(out);
    for d in &trace.days {
        for u in &d.users {
            w.serialize(RequestRow {
                day: d.day,
                id: u.id.0,
                submit: u.submission_slot,
                arrive: u.arrival_slot,
                depart: u.departure_slot,
                energy: u.energy,
                valuations: format_valuations(&u.valuations),
            })?;
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// One row per facility and slot: `day,facility,slot,solar`.
pub fn write_solar_csv<W: Write>(
    trace: &ScenarioTrace,
    facilities: &[FacilityConfig],
    out: W,
) -> Result<(), ScenarioError> {
    let mut w = csv::Writer::from_writer(out);
    for d in &trace.days {
        for (f, series) in facilities.iter().zip(&d.solar) {
            for (slot, &solar) in series.iter().enumerate() {
                w.serialize(SolarRow {
                    day: d.day,
                    facility: f.id.0,
                    slot,
                    solar,
                })?;
            }
        }
    }
    w.flush().map_err(csv::Error::from)?;
    Ok(())
}

/// Reads a trace written by [`write_requests_csv`] and, optionally,
/// [`write_solar_csv`]. Days without solar rows get the facilities' own series.
pub fn read_trace_csv<R: Read, S: Read>(
    requests: R,
    solar: Option<S>,
    facilities: &[FacilityConfig],
    grid: TimeGrid,
) -> Result<ScenarioTrace, ScenarioError> {
    let mut days: BTreeMap<usize, DayTrace> = BTreeMap::new();
    let default_solar: Vec<Vec<f64>> = facilities.iter().map(|f| f.solar.clone()).collect();
    let mut rdr = csv::Reader::from_reader(requests);
    for (i, row) in rdr.deserialize::<RequestRow>().enumerate() {
        let row = row?;
        let user = UserRequest {
            id: UserId(row.id),
            submission_slot: row.submit,
            arrival_slot: row.arrive,
            departure_slot: row.depart,
            energy: row.energy,
            valuations: parse_valuations(&row.valuations, i + 2)?,
        };
        days.entry(row.day)
            .or_insert_with(|| DayTrace {
                day: row.day,
                users: Vec::new(),
                solar: default_solar.clone(),
            })
            .users
            .push(user);
    }
    if let Some(solar) = solar {
        let mut rdr = csv::Reader::from_reader(solar);
        for (i, row) in rdr.deserialize::<SolarRow>().enumerate() {
            let row = row?;
            let bad = |reason: String| ScenarioError::Row { row: i + 2, reason };
            let fi = facilities
                .iter()
                .position(|f| f.id.0 == row.facility)
                .ok_or_else(|| bad(format!("unknown facility {}", row.facility)))?;
            if row.slot >= grid.horizon {
                return Err(bad(format!("slot {} beyond horizon", row.slot)));
            }
            days.entry(row.day)
                .or_insert_with(|| DayTrace {
                    day: row.day,
                    users: Vec::new(),
                    solar: default_solar.clone(),
                })
                .solar[fi][row.slot] = row.solar;
        }
    }
    let trace = ScenarioTrace {
        days: days.into_values().collect(),
    };
    for d in &trace.days {
        d.instance(facilities, grid)?;
    }
    Ok(trace)
}
