//! Marginal price functions, valuation bounds, operational cost, Fenchel
//! conjugates and competitive-ratio bounds.
//!
//! Every function here is pure. Prices are posted per unit of resource and
//! depend only on the current demand `y` of that resource.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{FacilityConfig, FacilityId, LevelSet, ScheduleOption, UserId, UserRequest};

/// Exhausted resources are priced at `max upper bound * EXHAUSTED_PRICE_FACTOR`.
pub const EXHAUSTED_PRICE_FACTOR: f64 = 1e6;

const DOMAIN_EPS: f64 = 1e-9;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum PricingError {
    #[error("no users to derive bounds from")]
    NoUsers,
    #[error("user {0} has no schedule options")]
    NoOptions(UserId),
    #[error("every schedule option is empty")]
    ZeroSchedules,
    #[error("{resource} demand {demand} outside [0, {capacity}]")]
    OutOfRange {
        resource: &'static str,
        demand: f64,
        capacity: f64,
    },
    #[error("price must be non-negative, got {0}")]
    NegativePrice(f64),
    #[error("invalid {resource} bounds: lower {lower}, upper {upper}")]
    InvalidBounds {
        resource: &'static str,
        lower: f64,
        upper: f64,
    },
    #[error("procurement lower bound {lower} must exceed the highest grid price {max_price}")]
    ProcurementFloor { lower: f64, max_price: f64 },
    #[error("aggregate resource count {r} is below the required {required} (e*L_g / (2 max price))")]
    RAssumption { r: f64, required: f64 },
    #[error("realized {resource} upper bound {realized} exceeds the configured {configured}")]
    BoundExceeded {
        resource: &'static str,
        configured: f64,
        realized: f64,
    },
    #[error("forecast evaluated at slot {t} from the later slot {t_current}")]
    ForecastFromFuture { t: usize, t_current: usize },
    #[error("invalid forecast: {0}")]
    InvalidForecast(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ResourceBounds {
    pub lower: f64,
    pub upper: f64,
}

impl ResourceBounds {
    pub fn new(lower: f64, upper: f64) -> Self {
        Self { lower, upper }
    }

    fn check(&self, resource: &'static str) -> Result<(), PricingError> {
        if self.lower > 0.0 && self.lower <= self.upper && self.upper.is_finite() {
            Ok(())
        } else {
            Err(PricingError::InvalidBounds {
                resource,
                lower: self.lower,
                upper: self.upper,
            })
        }
    }
}

/// Lower/upper valuation bounds per resource plus the aggregate resource count `R`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ValuationBounds {
    pub cable: ResourceBounds,
    pub energy: ResourceBounds,
    pub procurement: ResourceBounds,
    pub aggregate_r: f64,
}

/// `R = sum over facilities of M (C + E + 1/M)`.
///
/// Mixes cable counts and energy units; it is used as a dimensionless scale.
pub fn aggregate_r(facilities: &[FacilityConfig]) -> f64 {
    facilities
        .iter()
        .map(|f| {
            let m = f.evse_count as f64;
            m * (f64::from(f.cables_per_evse) + f64::from(f.evse_max_energy) + 1.0 / m)
        })
        .sum()
}

fn max_grid_price(facilities: &[FacilityConfig]) -> f64 {
    facilities
        .iter()
        .flat_map(|f| f.grid_price.iter().copied())
        .fold(0.0, f64::max)
}

impl ValuationBounds {
    pub fn new(
        cable: ResourceBounds,
        energy: ResourceBounds,
        procurement: ResourceBounds,
        facilities: &[FacilityConfig],
    ) -> Self {
        Self {
            cable,
            energy,
            procurement,
            aggregate_r: aggregate_r(facilities),
        }
    }

    /// The same bounds rescaled to another facility set (R changes with the fleet).
    pub fn for_facilities(&self, facilities: &[FacilityConfig]) -> Self {
        Self::new(self.cable, self.energy, self.procurement, facilities)
    }

    /// `0 < L <= U` for every resource and `L_g > max pi(t)`.
    pub fn check(&self, facilities: &[FacilityConfig]) -> Result<(), PricingError> {
        self.cable.check("cable")?;
        self.energy.check("energy")?;
        self.procurement.check("procurement")?;
        let max_price = max_grid_price(facilities);
        if self.procurement.lower <= max_price {
            return Err(PricingError::ProcurementFloor {
                lower: self.procurement.lower,
                max_price,
            });
        }
        Ok(())
    }

    /// `ceil(e * L_g / (2 max pi))`, the smallest `R` the ratio guarantees allow.
    pub fn required_r(&self, facilities: &[FacilityConfig]) -> f64 {
        (std::f64::consts::E * self.procurement.lower / (2.0 * max_grid_price(facilities))).ceil()
    }

    pub fn check_r_assumption(&self, facilities: &[FacilityConfig]) -> Result<(), PricingError> {
        let required = self.required_r(facilities);
        if self.aggregate_r + DOMAIN_EPS >= required {
            Ok(())
        } else {
            Err(PricingError::RAssumption {
                r: self.aggregate_r,
                required,
            })
        }
    }

    /// Fails if a realized scenario needs a higher upper bound than configured.
    ///
    /// Realized lower bounds below the configured ones are allowed: users
    /// valuing a resource below `L` are simply priced out.
    pub fn check_covers(&self, realized: &ValuationBounds) -> Result<(), PricingError> {
        for (resource, configured, seen) in [
            ("cable", self.cable, realized.cable),
            ("energy", self.energy, realized.energy),
            ("procurement", self.procurement, realized.procurement),
        ] {
            if seen.upper > configured.upper + DOMAIN_EPS {
                return Err(PricingError::BoundExceeded {
                    resource,
                    configured: configured.upper,
                    realized: seen.upper,
                });
            }
        }
        Ok(())
    }

    /// Finite stand-in for an infinite price.
    pub fn exhausted_price(&self) -> f64 {
        self.cable.upper.max(self.energy.upper).max(self.procurement.upper) * EXHAUSTED_PRICE_FACTOR
    }
}

#[derive(Default)]
struct BoundsAccumulator {
    l_c: f64,
    u_c: f64,
    l_e: f64,
    u_e: f64,
    any: bool,
}

impl BoundsAccumulator {
    fn new() -> Self {
        Self {
            l_c: f64::INFINITY,
            l_e: f64::INFINITY,
            ..Default::default()
        }
    }

    fn finish(self, r: f64) -> Result<ValuationBounds, PricingError> {
        if !self.any {
            return Err(PricingError::ZeroSchedules);
        }
        let energy = ResourceBounds::new(self.l_e, self.u_e);
        Ok(ValuationBounds {
            cable: ResourceBounds::new(self.l_c, self.u_c),
            energy,
            procurement: energy,
            aggregate_r: r,
        })
    }
}

/// Valuation bounds realized by an explicit option universe.
///
/// `universe[i]` lists the options of `users[i]`. The cable lower bound is
/// the least valuation per `R` cable-slot over all options; the upper bound
/// is the largest valuation per reserved cable in a single slot. Energy
/// bounds are computed the same way from the charge schedule, and the
/// procurement bounds equal the energy bounds.
pub fn compute_bounds(
    users: &[UserRequest],
    facilities: &[FacilityConfig],
    universe: &[Vec<ScheduleOption>],
) -> Result<ValuationBounds, PricingError> {
    if users.is_empty() {
        return Err(PricingError::NoUsers);
    }
    let r = aggregate_r(facilities);
    let mut acc = BoundsAccumulator::new();
    for (user, options) in users.iter().zip(universe) {
        if options.is_empty() {
            return Err(PricingError::NoOptions(user.id));
        }
        for o in options {
            let Some(v) = user.valuation(o.facility) else {
                continue;
            };
            let energy = o.total_energy();
            if energy == 0 || o.charge.is_empty() {
                continue;
            }
            acc.any = true;
            acc.l_c = acc.l_c.min(v / (r * o.charge.len() as f64));
            acc.u_c = acc.u_c.max(v);
            acc.l_e = acc.l_e.min(v / (r * f64::from(energy)));
            for &e in o.charge.iter().filter(|&&e| e > 0) {
                acc.u_e = acc.u_e.max(v / f64::from(e));
            }
        }
    }
    if universe.len() < users.len() {
        return Err(PricingError::NoOptions(users[universe.len()].id));
    }
    acc.finish(r)
}

/// Same bounds as [`compute_bounds`] over the full option universe generated
/// by `levels`, without enumerating it.
///
/// Every option of a user reserves the whole stay and delivers exactly the
/// requested energy, so only the smallest positive per-slot level matters:
/// it is 1 whenever the rest of the request fits in the other slots.
pub fn compute_bounds_for_levels(
    users: &[UserRequest],
    facilities: &[FacilityConfig],
    levels: LevelSet,
) -> Result<ValuationBounds, PricingError> {
    if users.is_empty() {
        return Err(PricingError::NoUsers);
    }
    let r = aggregate_r(facilities);
    let mut acc = BoundsAccumulator::new();
    for user in users {
        let window = user.stay_len() as u64;
        let h = u64::from(user.energy);
        let mut feasible = false;
        for (l, v) in &user.valuations {
            let Some(f) = facilities.iter().find(|f| f.id == *l) else {
                continue;
            };
            let cap = u64::from(levels.cap(f.evse_max_energy));
            if cap == 0 || h > cap * window {
                continue;
            }
            feasible = true;
            let rest = cap * (window - 1);
            let smallest_part = if h - 1 <= rest { 1 } else { h - rest };
            acc.any = true;
            acc.l_c = acc.l_c.min(v / (r * window as f64));
            acc.u_c = acc.u_c.max(*v);
            acc.l_e = acc.l_e.min(v / (r * h as f64));
            acc.u_e = acc.u_e.max(v / smallest_part as f64);
        }
        if !feasible {
            return Err(PricingError::NoOptions(user.id));
        }
    }
    acc.finish(r)
}

fn exponential_price(lower: f64, upper: f64, r: f64, fraction: f64) -> f64 {
    (lower / (2.0 * r)) * (2.0 * r * upper / lower).powf(fraction)
}

fn check_demand(resource: &'static str, y: f64, capacity: f64) -> Result<(), PricingError> {
    if y >= -DOMAIN_EPS && y <= capacity + DOMAIN_EPS {
        Ok(())
    } else {
        Err(PricingError::OutOfRange {
            resource,
            demand: y,
            capacity,
        })
    }
}

/// Price of one cable-slot at a charger currently holding `y` cables.
pub fn cable_price(y: f64, facility: &FacilityConfig, bounds: &ValuationBounds) -> Result<f64, PricingError> {
    let cap = f64::from(facility.cables_per_evse);
    check_demand("cable", y, cap)?;
    Ok(exponential_price(
        bounds.cable.lower,
        bounds.cable.upper,
        bounds.aggregate_r,
        y.max(0.0) / cap,
    ))
}

/// Price of one unit of charger energy at current charger demand `y`.
pub fn energy_price(y: f64, facility: &FacilityConfig, bounds: &ValuationBounds) -> Result<f64, PricingError> {
    let cap = f64::from(facility.evse_max_energy);
    check_demand("energy", y, cap)?;
    Ok(exponential_price(
        bounds.energy.lower,
        bounds.energy.upper,
        bounds.aggregate_r,
        y.max(0.0) / cap,
    ))
}

/// Procurement price for given solar `s`, transformer limit `G` and grid price `pi`.
///
/// Below the solar level the price climbs from `L_g / 2R` toward `pi`; from
/// `y = s` on (right-continuous branch choice) it climbs from just above `pi`
/// to `U_g` at `s + G`. With `s = 0` only the upper branch exists. Demand
/// beyond `s + G` returns the exhausted-resource sentinel.
pub fn procurement_price_at(
    y: f64,
    solar: f64,
    transformer: f64,
    grid_price: f64,
    bounds: &ValuationBounds,
) -> Result<f64, PricingError> {
    let ResourceBounds { lower, upper } = bounds.procurement;
    if lower <= grid_price {
        return Err(PricingError::ProcurementFloor {
            lower,
            max_price: grid_price,
        });
    }
    if y < -DOMAIN_EPS {
        return Err(PricingError::OutOfRange {
            resource: "procurement",
            demand: y,
            capacity: solar + transformer,
        });
    }
    let y = y.max(0.0);
    let capacity = solar + transformer;
    if y > capacity + DOMAIN_EPS {
        return Ok(bounds.exhausted_price());
    }
    let r = bounds.aggregate_r;
    if solar > 0.0 && y < solar {
        return Ok(exponential_price(lower, grid_price, r, y / solar));
    }
    let fraction = if capacity > 0.0 { y / capacity } else { 0.0 };
    Ok(exponential_price(lower - grid_price, upper - grid_price, r, fraction) + grid_price)
}

/// Procurement price at facility demand `y` in slot `t`, using realized solar.
pub fn procurement_price(
    y: f64,
    t: usize,
    facility: &FacilityConfig,
    bounds: &ValuationBounds,
) -> Result<f64, PricingError> {
    procurement_price_at(
        y,
        facility.solar[t],
        facility.transformer_limit[t],
        facility.grid_price[t],
        bounds,
    )
}

/// Procurement price seen at `t_current` for slot `t`, using the forecast's
/// lower solar estimate in place of the realized value.
pub fn procurement_price_forecast(
    y: f64,
    t: usize,
    t_current: usize,
    facility: &FacilityConfig,
    forecast: &SolarForecast,
    bounds: &ValuationBounds,
) -> Result<f64, PricingError> {
    if t_current > t {
        return Err(PricingError::ForecastFromFuture { t, t_current });
    }
    procurement_price_at(
        y,
        forecast.lower(t, t_current),
        facility.transformer_limit[t],
        facility.grid_price[t],
        bounds,
    )
}

/// Derivative of [`procurement_price_at`] with respect to `y` (one-sided at `s`).
pub fn procurement_price_slope(y: f64, solar: f64, transformer: f64, grid_price: f64, bounds: &ValuationBounds) -> f64 {
    let ResourceBounds { lower, upper } = bounds.procurement;
    let r = bounds.aggregate_r;
    if solar > 0.0 && y < solar {
        let growth = 2.0 * r * grid_price / lower;
        (lower / (2.0 * r * solar)) * growth.powf(y / solar) * growth.ln()
    } else {
        let capacity = solar + transformer;
        let growth = 2.0 * r * (upper - grid_price) / (lower - grid_price);
        ((lower - grid_price) / (2.0 * r * capacity)) * growth.powf(y / capacity) * growth.ln()
    }
}

/// `f_g(y)`: zero while solar covers demand, grid tariff above it, infinite past `s + G`.
pub fn operational_cost_at(y: f64, solar: f64, transformer: f64, grid_price: f64) -> f64 {
    if y < solar {
        0.0
    } else if y <= solar + transformer + DOMAIN_EPS {
        grid_price * (y - solar)
    } else {
        f64::INFINITY
    }
}

pub fn operational_cost(y: f64, t: usize, facility: &FacilityConfig) -> f64 {
    operational_cost_at(
        y,
        facility.solar[t],
        facility.transformer_limit[t],
        facility.grid_price[t],
    )
}

/// Marginal operational cost `f_g'(y)`.
pub fn operational_cost_slope(y: f64, solar: f64, grid_price: f64) -> f64 {
    if y < solar {
        0.0
    } else {
        grid_price
    }
}

fn check_price(p: f64) -> Result<(), PricingError> {
    if p >= 0.0 {
        Ok(())
    } else {
        Err(PricingError::NegativePrice(p))
    }
}

/// Conjugate of the cable capacity indicator: `p * C`.
pub fn cable_conjugate(p: f64, facility: &FacilityConfig) -> Result<f64, PricingError> {
    check_price(p)?;
    Ok(p * f64::from(facility.cables_per_evse))
}

/// Conjugate of the charger energy capacity indicator: `p * E`.
pub fn energy_conjugate(p: f64, facility: &FacilityConfig) -> Result<f64, PricingError> {
    check_price(p)?;
    Ok(p * f64::from(facility.evse_max_energy))
}

/// Conjugate of the procurement cost: `s p` below the tariff, `(s + G) p - G pi` from it on.
pub fn procurement_conjugate_at(p: f64, solar: f64, transformer: f64, grid_price: f64) -> Result<f64, PricingError> {
    check_price(p)?;
    Ok(if p < grid_price {
        solar * p
    } else {
        (solar + transformer) * p - transformer * grid_price
    })
}

/// Derivative of the procurement conjugate with respect to the price.
pub fn procurement_conjugate_slope(p: f64, solar: f64, transformer: f64, grid_price: f64) -> f64 {
    if p < grid_price {
        solar
    } else {
        solar + transformer
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Conjugates {
    pub cable: f64,
    pub energy: f64,
    pub procurement: f64,
}

/// All three conjugates evaluated at the same price `p` in slot `t`.
pub fn fenchel_conjugates(p: f64, t: usize, facility: &FacilityConfig) -> Result<Conjugates, PricingError> {
    Ok(Conjugates {
        cable: cable_conjugate(p, facility)?,
        energy: energy_conjugate(p, facility)?,
        procurement: procurement_conjugate_at(
            p,
            facility.solar[t],
            facility.transformer_limit[t],
            facility.grid_price[t],
        )?,
    })
}

/// Left side minus right side of the differential allocation-payment
/// inequality `(p(y) - f'(y)) dy >= (1/alpha) f*'(p(y)) p'(y) dy` for one
/// procurement resource. Non-negative means the inequality holds.
pub fn allocation_payment_gap(
    y: f64,
    dy: f64,
    solar: f64,
    transformer: f64,
    grid_price: f64,
    bounds: &ValuationBounds,
    alpha: f64,
) -> Result<f64, PricingError> {
    let p = procurement_price_at(y, solar, transformer, grid_price, bounds)?;
    let dp = procurement_price_slope(y, solar, transformer, grid_price, bounds) * dy;
    let lhs = (p - operational_cost_slope(y, solar, grid_price)) * dy;
    let rhs = procurement_conjugate_slope(p, solar, transformer, grid_price) * dp / alpha;
    Ok(lhs - rhs)
}

/// Interval forecast of one facility's solar production.
///
/// `lower(t, t_current)` and `upper(t, t_current)` bracket the realized value
/// `s(t)`; the bracket half-width depends on the lead `t - t_current` and is
/// zero at lead 0. Leads past the end of `widths` reuse its last entry.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SolarForecast {
    realized: Vec<f64>,
    rating: f64,
    widths: Vec<f64>,
}

impl SolarForecast {
    /// `widths[d]` is the bracket width at lead `d`; it must be non-negative
    /// and non-decreasing in `d`. `widths[0]` is forced to zero.
    pub fn new(realized: Vec<f64>, rating: f64, mut widths: Vec<f64>) -> Result<Self, PricingError> {
        if let Some(w) = widths.iter().find(|w| !(**w >= 0.0 && w.is_finite())) {
            return Err(PricingError::InvalidForecast(format!("negative width {w}")));
        }
        if let Some(first) = widths.first_mut() {
            *first = 0.0;
        }
        if widths.windows(2).any(|w| w[1] < w[0]) {
            return Err(PricingError::InvalidForecast(
                "widths must not shrink as the lead grows".into(),
            ));
        }
        if realized.iter().any(|&s| s < 0.0 || s > rating + DOMAIN_EPS) {
            return Err(PricingError::InvalidForecast(
                "realized solar outside [0, rating]".into(),
            ));
        }
        Ok(Self {
            realized,
            rating,
            widths,
        })
    }

    pub fn perfect(realized: Vec<f64>, rating: f64) -> Self {
        Self {
            realized,
            rating,
            widths: vec![0.0],
        }
    }

    pub fn horizon(&self) -> usize {
        self.realized.len()
    }

    pub fn realized(&self, t: usize) -> f64 {
        self.realized[t]
    }

    fn width(&self, lead: usize) -> f64 {
        if lead == 0 {
            return 0.0;
        }
        self.widths.get(lead).or(self.widths.last()).copied().unwrap_or(0.0)
    }

    /// Forecast floor for slot `t` as known at `t_current` (clamped to `t`).
    pub fn lower(&self, t: usize, t_current: usize) -> f64 {
        let lead = t.saturating_sub(t_current);
        (self.realized[t] - self.width(lead)).max(0.0)
    }

    /// Forecast ceiling for slot `t` as known at `t_current` (clamped to `t`).
    pub fn upper(&self, t: usize, t_current: usize) -> f64 {
        let lead = t.saturating_sub(t_current);
        (self.realized[t] + self.width(lead)).min(self.rating)
    }

    /// Exhaustive check of the bracket and monotonicity properties.
    pub fn check_invariants(&self) -> Vec<String> {
        let mut problems = Vec::new();
        for t in 0..self.horizon() {
            let s = self.realized[t];
            if self.lower(t, t) != s || self.upper(t, t) != s {
                problems.push(format!("slot {t}: bracket not tight at lead 0"));
            }
            for tc in 0..=t {
                let (lo, hi) = (self.lower(t, tc), self.upper(t, tc));
                if !(lo <= s && s <= hi) {
                    problems.push(format!("slot {t} from {tc}: [{lo}, {hi}] misses {s}"));
                }
                if tc > 0 && (lo < self.lower(t, tc - 1) || hi > self.upper(t, tc - 1)) {
                    problems.push(format!("slot {t} from {tc}: bracket widened"));
                }
            }
        }
        problems
    }
}

/// Per-(facility, slot) terms of the ratio bounds.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SlotRatio {
    pub facility: FacilityId,
    pub slot: usize,
    /// `ln(2 R pi / L_g)`, the solar-branch requirement.
    pub solar_log: f64,
    /// `ln(2 R (U_g - pi) / (L_g - pi))`, the grid-branch requirement.
    pub grid_log: f64,
    /// `max(solar_log, grid_log)`.
    pub alpha_g: f64,
    /// Forecast-inflated requirement, when a forecast was supplied.
    pub forecast_alpha_g: Option<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct RatioBounds {
    /// Guarantee under realized solar.
    pub alpha_1: f64,
    /// Guarantee when final demand stays under the available solar.
    pub alpha_2: f64,
    /// Guarantee when pricing with the forecast floor.
    pub alpha_3: Option<f64>,
    pub slots: Vec<SlotRatio>,
}

/// Competitive-ratio bounds for the given bounds and facilities.
///
/// `forecasts`, when given, holds one forecast per facility (same order) and
/// yields `alpha_3` from the day-start brackets. Refuses when `L_g` does not
/// exceed every grid price or the aggregate `R` is too small.
pub fn ratio_bounds(
    facilities: &[FacilityConfig],
    bounds: &ValuationBounds,
    forecasts: Option<&[SolarForecast]>,
) -> Result<RatioBounds, PricingError> {
    bounds.check(facilities)?;
    bounds.check_r_assumption(facilities)?;
    let r = bounds.aggregate_r;
    let ResourceBounds { lower, upper } = bounds.procurement;
    let mut slots = Vec::new();
    let (mut a1, mut a2) = (f64::NEG_INFINITY, f64::NEG_INFINITY);
    let mut a3: Option<f64> = None;
    for (fi, f) in facilities.iter().enumerate() {
        for t in 0..f.grid_price.len() {
            let pi = f.grid_price[t];
            let solar_log = (2.0 * r * pi / lower).ln();
            let grid_log = (2.0 * r * (upper - pi) / (lower - pi)).ln();
            a1 = a1.max(grid_log);
            a2 = a2.max(solar_log);
            let forecast_alpha_g = forecasts.and_then(|fc| {
                let fc = &fc[fi];
                let (lo, hi, g) = (fc.lower(t, 0), fc.upper(t, 0), f.transformer_limit[t]);
                if lo > 0.0 {
                    Some(((hi / lo) * solar_log).max(((hi + g) / (lo + g)) * grid_log))
                } else if g > 0.0 {
                    Some(((hi + g) / g) * grid_log)
                } else {
                    // nothing to sell in this slot
                    None
                }
            });
            if let Some(a) = forecast_alpha_g {
                a3 = Some(a3.map_or(a, |x| x.max(a)));
            }
            slots.push(SlotRatio {
                facility: f.id,
                slot: t,
                solar_log,
                grid_log,
                alpha_g: solar_log.max(grid_log),
                forecast_alpha_g,
            });
        }
    }
    Ok(RatioBounds {
        alpha_1: 2.0 * a1,
        alpha_2: 2.0 * a2,
        alpha_3: a3.map(|a| 2.0 * a),
        slots,
    })
}
