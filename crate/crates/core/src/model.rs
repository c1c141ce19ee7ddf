//! Domain types shared by every controller: the slotted time grid, facility
//! parameters, user requests, schedule options and the allocation state.
//!
//! Slots are zero-based: a grid with `horizon = T` has slots `0..T`. A user's
//! stay `[arrival_slot, departure_slot]` is inclusive on both ends. Energy is
//! counted in integer base units (1 kWh by default); solar, transformer limits
//! and prices are real-valued.

use std::collections::BTreeMap;
use std::fmt;
use std::ops::RangeInclusive;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Absolute tolerance used for every currency comparison.
pub const CURRENCY_EPS: f64 = 1e-9;

/// Slack used when converting real-valued capacity headroom into whole units.
pub(crate) const UNIT_EPS: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FacilityId(pub u32);

impl fmt::Display for FacilityId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(transparent)]
pub struct UserId(pub u32);

impl fmt::Display for UserId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TimeGrid {
    /// Number of slots in the planning horizon.
    pub horizon: usize,
    /// Length of one slot in hours.
    pub slot_hours: f64,
}

impl TimeGrid {
    pub fn new(horizon: usize, slot_hours: f64) -> Self {
        Self { horizon, slot_hours }
    }

    /// 24 one-hour slots.
    pub fn hourly_day() -> Self {
        Self::new(24, 1.0)
    }

    pub fn slots(&self) -> std::ops::Range<usize> {
        0..self.horizon
    }
}

impl Default for TimeGrid {
    fn default() -> Self {
        Self::hourly_day()
    }
}

/// Static parameters of one parking facility.
///
/// The per-slot series (`transformer_limit`, `solar`, `grid_price`) must have
/// exactly one entry per slot of the grid.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FacilityConfig {
    pub id: FacilityId,
    /// Number of SOMC chargers (EVSEs).
    pub evse_count: usize,
    /// Cables per charger, i.e. how many vehicles one charger can hold.
    pub cables_per_evse: u32,
    /// Maximum energy one charger can deliver in one slot.
    pub evse_max_energy: u32,
    /// Maximum grid energy per slot.
    pub transformer_limit: Vec<f64>,
    /// Behind-the-meter solar energy available per slot.
    pub solar: Vec<f64>,
    /// Rating of the solar system in energy units per slot.
    pub solar_rating: f64,
    /// Grid tariff per energy unit, per slot.
    pub grid_price: Vec<f64>,
}

impl FacilityConfig {
    /// A facility with flat grid price and transformer limit and no solar.
    pub fn uniform(
        id: u32,
        evse_count: usize,
        cables_per_evse: u32,
        evse_max_energy: u32,
        horizon: usize,
        transformer_limit: f64,
        grid_price: f64,
    ) -> Self {
        Self {
            id: FacilityId(id),
            evse_count,
            cables_per_evse,
            evse_max_energy,
            transformer_limit: vec![transformer_limit; horizon],
            solar: vec![0.0; horizon],
            solar_rating: 0.0,
            grid_price: vec![grid_price; horizon],
        }
    }

    pub fn with_solar(mut self, solar: Vec<f64>, rating: f64) -> Self {
        self.solar = solar;
        self.solar_rating = rating;
        self
    }

    /// `s(t) + G(t)`: the most energy the facility can procure in slot `t`.
    pub fn procurement_capacity(&self, t: usize) -> f64 {
        self.solar[t] + self.transformer_limit[t]
    }

    pub fn parking_spots(&self) -> usize {
        self.evse_count * self.cables_per_evse as usize
    }
}

/// A reservation request: the user's type plus identifiers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct UserRequest {
    pub id: UserId,
    /// Slot in which the request is submitted; never after `arrival_slot`.
    pub submission_slot: usize,
    pub arrival_slot: usize,
    /// Last slot of the stay (inclusive).
    pub departure_slot: usize,
    /// Requested energy in base units.
    pub energy: u32,
    /// Valuation per preferred facility; the keys are the preference set.
    pub valuations: BTreeMap<FacilityId, f64>,
}

impl UserRequest {
    pub fn new(
        id: u32,
        arrival_slot: usize,
        departure_slot: usize,
        energy: u32,
        valuations: impl IntoIterator<Item = (u32, f64)>,
    ) -> Self {
        Self {
            id: UserId(id),
            submission_slot: arrival_slot,
            arrival_slot,
            departure_slot,
            energy,
            valuations: valuations.into_iter().map(|(l, v)| (FacilityId(l), v)).collect(),
        }
    }

    pub fn submitted_at(mut self, slot: usize) -> Self {
        self.submission_slot = slot;
        self
    }

    pub fn window(&self) -> RangeInclusive<usize> {
        self.arrival_slot..=self.departure_slot
    }

    /// Number of slots in the stay.
    pub fn stay_len(&self) -> usize {
        self.departure_slot + 1 - self.arrival_slot
    }

    pub fn valuation(&self, facility: FacilityId) -> Option<f64> {
        self.valuations.get(&facility).copied()
    }

    pub fn preferred(&self) -> impl Iterator<Item = FacilityId> + '_ {
        self.valuations.keys().copied()
    }

    pub fn max_valuation(&self) -> f64 {
        self.valuations.values().copied().fold(0.0, f64::max)
    }
}

/// Per-slot charge levels available to one vehicle: `{0, 1, ..., max}`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct LevelSet {
    pub max: u32,
}

impl LevelSet {
    pub fn up_to(max: u32) -> Self {
        Self { max }
    }

    /// The largest level usable at a charger limited to `evse_max_energy`.
    pub fn cap(&self, evse_max_energy: u32) -> u32 {
        self.max.min(evse_max_energy)
    }

    /// Level set that lets every charger run at its full rate.
    pub fn unrestricted() -> Self {
        Self { max: u32::MAX }
    }
}

impl Default for LevelSet {
    fn default() -> Self {
        Self::unrestricted()
    }
}

/// A cable reservation over the whole stay plus a charge schedule at one charger.
///
/// The cable is held for every slot of `[start, start + charge.len())`;
/// `charge[i]` is the energy delivered in slot `start + i`.
#[derive(Debug, Clone, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ScheduleOption {
    pub facility: FacilityId,
    /// Zero-based charger index within the facility.
    pub evse: usize,
    pub start: usize,
    pub charge: Vec<u32>,
}

impl ScheduleOption {
    /// Last reserved slot (inclusive).
    pub fn end(&self) -> usize {
        self.start + self.charge.len() - 1
    }

    pub fn slots(&self) -> RangeInclusive<usize> {
        self.start..=self.end()
    }

    pub fn cable(&self, t: usize) -> u32 {
        u32::from(self.slots().contains(&t))
    }

    pub fn energy(&self, t: usize) -> u32 {
        if self.slots().contains(&t) {
            self.charge[t - self.start]
        } else {
            0
        }
    }

    /// `(slot, energy)` pairs over the reservation.
    pub fn schedule(&self) -> impl Iterator<Item = (usize, u32)> + '_ {
        self.charge.iter().enumerate().map(move |(i, &e)| (self.start + i, e))
    }

    pub fn total_energy(&self) -> u32 {
        self.charge.iter().sum()
    }

    /// Checks the option against the request it was built for.
    pub fn check_for(&self, user: &UserRequest, facility: &FacilityConfig) -> Result<(), String> {
        if facility.id != self.facility {
            return Err(format!(
                "option targets facility {} but was checked against {}",
                self.facility, facility.id
            ));
        }
        if user.valuation(self.facility).is_none() {
            return Err(format!(
                "facility {} is not preferred by user {}",
                self.facility, user.id
            ));
        }
        if self.evse >= facility.evse_count {
            return Err(format!("charger {} does not exist", self.evse));
        }
        if self.charge.is_empty() || self.start != user.arrival_slot || self.end() != user.departure_slot {
            return Err("cable reservation does not match the stay".into());
        }
        if let Some(e) = self.charge.iter().find(|&&e| e > facility.evse_max_energy) {
            return Err(format!("charge {e} exceeds charger limit {}", facility.evse_max_energy));
        }
        if self.total_energy() != user.energy {
            return Err(format!(
                "schedule delivers {} units, request is {}",
                self.total_energy(),
                user.energy
            ));
        }
        Ok(())
    }
}

/// The outcome of one admission decision.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Decision {
    pub user: UserId,
    /// Utility the controller attributes to the user; 0 when rejected.
    pub utility: f64,
    pub option: Option<ScheduleOption>,
    pub payment: Option<f64>,
}

impl Decision {
    pub fn rejected(user: UserId) -> Self {
        Self {
            user,
            utility: 0.0,
            option: None,
            payment: None,
        }
    }

    pub fn accepted(&self) -> bool {
        self.option.is_some()
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Violation {
    pub entity: String,
    pub message: String,
}

impl fmt::Display for Violation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.entity, self.message)
    }
}

/// Every invariant an instance failed, in discovery order.
#[derive(Debug, Clone, PartialEq, Eq, Error)]
#[error("invalid instance ({} violation(s)): {}", .violations.len(), display_list(.violations))]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

fn display_list(v: &[Violation]) -> String {
    v.iter().map(|x| x.to_string()).collect::<Vec<_>>().join("; ")
}

impl ValidationReport {
    pub fn mentions(&self, needle: &str) -> bool {
        self.violations.iter().any(|v| v.message.contains(needle))
    }
}

/// A validated problem instance: grid, facilities and the arrival sequence.
#[derive(Debug, Clone, PartialEq)]
pub struct Instance {
    grid: TimeGrid,
    facilities: Vec<FacilityConfig>,
    users: Vec<UserRequest>,
    index: BTreeMap<FacilityId, usize>,
}

/// Validates every type invariant and returns the instance, or all violations.
pub fn validate_instance(
    facilities: Vec<FacilityConfig>,
    grid: TimeGrid,
    users: Vec<UserRequest>,
) -> Result<Instance, ValidationReport> {
    Instance::new(grid, facilities, users)
}

impl Instance {
    pub fn new(
        grid: TimeGrid,
        facilities: Vec<FacilityConfig>,
        users: Vec<UserRequest>,
    ) -> Result<Self, ValidationReport> {
        let mut violations = Vec::new();
        let mut push = |entity: String, message: String| violations.push(Violation { entity, message });

        if grid.horizon < 1 {
            push("grid".into(), "horizon must be at least one slot".into());
        }
        if !(grid.slot_hours > 0.0 && grid.slot_hours.is_finite()) {
            push("grid".into(), "slot duration must be positive".into());
        }
        if facilities.is_empty() {
            push("instance".into(), "no facilities".into());
        }

        let mut index = BTreeMap::new();
        for (i, f) in facilities.iter().enumerate() {
            let name = format!("facility {}", f.id);
            if index.insert(f.id, i).is_some() {
                push(name.clone(), "duplicate facility id".into());
            }
            if f.evse_count < 1 {
                push(name.clone(), "needs at least one charger".into());
            }
            if f.cables_per_evse < 1 {
                push(name.clone(), "needs at least one cable per charger".into());
            }
            if f.evse_max_energy < 1 {
                push(name.clone(), "charger energy limit must be positive".into());
            }
            if !(f.solar_rating >= 0.0 && f.solar_rating.is_finite()) {
                push(name.clone(), "solar rating must be non-negative".into());
            }
            for (label, series) in [
                ("transformer limit", &f.transformer_limit),
                ("solar", &f.solar),
                ("grid price", &f.grid_price),
            ] {
                if series.len() != grid.horizon {
                    push(
                        name.clone(),
                        format!("{label} series has {} slots, grid has {}", series.len(), grid.horizon),
                    );
                }
            }
            for (t, &s) in f.solar.iter().enumerate() {
                if !(s >= 0.0 && s <= f.solar_rating + UNIT_EPS) {
                    push(
                        name.clone(),
                        format!("solar {s} at slot {t} outside [0, {}]", f.solar_rating),
                    );
                }
            }
            for (t, &g) in f.transformer_limit.iter().enumerate() {
                if !(g >= 0.0 && g.is_finite()) {
                    push(name.clone(), format!("negative transformer limit at slot {t}"));
                }
            }
            for (t, &p) in f.grid_price.iter().enumerate() {
                if !(p > 0.0 && p.is_finite()) {
                    push(name.clone(), format!("grid price must be positive at slot {t}"));
                }
            }
        }

        let mut seen = BTreeMap::new();
        for u in &users {
            let name = format!("user {}", u.id);
            if seen.insert(u.id, ()).is_some() {
                push(name.clone(), "duplicate user id".into());
            }
            if u.arrival_slot > u.departure_slot {
                push(name.clone(), "empty window: arrival after departure".into());
            } else if u.departure_slot >= grid.horizon {
                push(
                    name.clone(),
                    format!("departure slot {} beyond horizon", u.departure_slot),
                );
            }
            if u.submission_slot > u.arrival_slot {
                push(name.clone(), "submitted after arrival".into());
            }
            if u.energy == 0 {
                push(name.clone(), "energy demand must be positive".into());
            }
            if u.valuations.is_empty() {
                push(name.clone(), "no preferred facility".into());
            }
            for (&l, &v) in &u.valuations {
                if !index.contains_key(&l) {
                    push(name.clone(), format!("unknown facility {l}"));
                }
                if !(v > 0.0 && v.is_finite()) {
                    push(name.clone(), format!("valuation for facility {l} must be positive"));
                }
            }
        }

        if violations.is_empty() {
            Ok(Self {
                grid,
                facilities,
                users,
                index,
            })
        } else {
            Err(ValidationReport { violations })
        }
    }

    pub fn grid(&self) -> TimeGrid {
        self.grid
    }

    pub fn horizon(&self) -> usize {
        self.grid.horizon
    }

    pub fn facilities(&self) -> &[FacilityConfig] {
        &self.facilities
    }

    pub fn users(&self) -> &[UserRequest] {
        &self.users
    }

    pub fn facility(&self, id: FacilityId) -> Option<&FacilityConfig> {
        self.index.get(&id).map(|&i| &self.facilities[i])
    }

    pub fn facility_index(&self, id: FacilityId) -> Option<usize> {
        self.index.get(&id).copied()
    }

    /// Same facilities and grid, different arrivals.
    pub fn with_users(&self, users: Vec<UserRequest>) -> Result<Self, ValidationReport> {
        Self::new(self.grid, self.facilities.clone(), users)
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum AllocationError {
    #[error("user {0} already holds an assignment")]
    AlreadyAssigned(UserId),
    #[error("unknown facility {0}")]
    UnknownFacility(FacilityId),
    #[error("charger {evse} at facility {facility} does not exist")]
    UnknownEvse { facility: FacilityId, evse: usize },
    #[error("slot {0} outside the horizon")]
    SlotOutOfRange(usize),
    #[error("{resource} capacity exceeded at facility {facility} slot {slot}")]
    CapacityExceeded {
        resource: &'static str,
        facility: FacilityId,
        slot: usize,
    },
}

/// One accepted reservation together with what the user was charged.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Assignment {
    pub option: ScheduleOption,
    pub payment: f64,
}

/// Running resource demands and accepted reservations.
///
/// Demands are indexed `[facility index][charger][slot]` (cables, energy) and
/// `[facility index][slot]` (procurement), with facility indices following
/// the instance's facility order.
#[derive(Debug, Clone, PartialEq)]
pub struct AllocationState {
    horizon: usize,
    cable: Vec<Vec<Vec<u32>>>,
    energy: Vec<Vec<Vec<u32>>>,
    procurement: Vec<Vec<u32>>,
    assignments: BTreeMap<UserId, Assignment>,
}

impl AllocationState {
    pub fn new(instance: &Instance) -> Self {
        let horizon = instance.horizon();
        let per_evse = |f: &FacilityConfig| vec![vec![0u32; horizon]; f.evse_count];
        Self {
            horizon,
            cable: instance.facilities().iter().map(per_evse).collect(),
            energy: instance.facilities().iter().map(per_evse).collect(),
            procurement: vec![vec![0; horizon]; instance.facilities().len()],
            assignments: BTreeMap::new(),
        }
    }

    pub fn cable_demand(&self, facility: usize, evse: usize, t: usize) -> u32 {
        self.cable[facility][evse][t]
    }

    pub fn energy_demand(&self, facility: usize, evse: usize, t: usize) -> u32 {
        self.energy[facility][evse][t]
    }

    pub fn procurement_demand(&self, facility: usize, t: usize) -> u32 {
        self.procurement[facility][t]
    }

    pub fn procurement_series(&self, facility: usize) -> &[u32] {
        &self.procurement[facility]
    }

    pub fn assignments(&self) -> &BTreeMap<UserId, Assignment> {
        &self.assignments
    }

    pub fn assignment(&self, user: UserId) -> Option<&Assignment> {
        self.assignments.get(&user)
    }

    pub fn is_empty(&self) -> bool {
        self.assignments.is_empty()
    }

    /// Whether the facility has no committed demand at all.
    pub fn facility_is_idle(&self, facility: usize) -> bool {
        self.cable[facility].iter().all(|row| row.iter().all(|&c| c == 0))
    }

    /// Checks that `option` fits the hard capacities `C`, `E` and `s + G`.
    pub fn fits(&self, instance: &Instance, option: &ScheduleOption) -> Result<(), AllocationError> {
        let fi = instance
            .facility_index(option.facility)
            .ok_or(AllocationError::UnknownFacility(option.facility))?;
        let f = &instance.facilities()[fi];
        if option.evse >= f.evse_count {
            return Err(AllocationError::UnknownEvse {
                facility: f.id,
                evse: option.evse,
            });
        }
        if option.charge.is_empty() || option.end() >= self.horizon {
            return Err(AllocationError::SlotOutOfRange(option.start + option.charge.len()));
        }
        for (t, e) in option.schedule() {
            let exceeded = |resource| AllocationError::CapacityExceeded {
                resource,
                facility: f.id,
                slot: t,
            };
            if self.cable[fi][option.evse][t] + 1 > f.cables_per_evse {
                return Err(exceeded("cable"));
            }
            if self.energy[fi][option.evse][t] + e > f.evse_max_energy {
                return Err(exceeded("charger energy"));
            }
            if f64::from(self.procurement[fi][t] + e) > f.procurement_capacity(t) + UNIT_EPS {
                return Err(exceeded("procurement"));
            }
        }
        Ok(())
    }

    /// Records an accepted reservation and adds its demands.
    ///
    /// Fails without modifying the state if the user already holds a
    /// reservation or any capacity would be exceeded.
    pub fn commit(
        &mut self,
        instance: &Instance,
        user: UserId,
        option: ScheduleOption,
        payment: f64,
    ) -> Result<(), AllocationError> {
        if self.assignments.contains_key(&user) {
            return Err(AllocationError::AlreadyAssigned(user));
        }
        self.fits(instance, &option)?;
        let fi = instance.facility_index(option.facility).expect("checked by fits");
        for (t, e) in option.schedule() {
            self.cable[fi][option.evse][t] += 1;
            self.energy[fi][option.evse][t] += e;
            self.procurement[fi][t] += e;
        }
        self.assignments.insert(user, Assignment { option, payment });
        Ok(())
    }

    /// Exhaustive scan of every capacity and accounting invariant.
    ///
    /// Returns a description of each violation; an empty vector means the
    /// state is consistent.
    pub fn check_invariants(&self, instance: &Instance) -> Vec<String> {
        let mut problems = Vec::new();
        let horizon = self.horizon;
        let mut cable: Vec<Vec<Vec<u32>>> = self.cable.iter().map(|f| vec![vec![0; horizon]; f.len()]).collect();
        let mut energy = cable.clone();
        for (user, a) in &self.assignments {
            let Some(fi) = instance.facility_index(a.option.facility) else {
                problems.push(format!("user {user} assigned to unknown facility"));
                continue;
            };
            if a.option.evse >= cable[fi].len() || a.option.end() >= horizon {
                problems.push(format!("user {user} assigned outside the grid"));
                continue;
            }
            for (t, e) in a.option.schedule() {
                cable[fi][a.option.evse][t] += 1;
                energy[fi][a.option.evse][t] += e;
            }
        }
        for (fi, f) in instance.facilities().iter().enumerate() {
            for t in 0..horizon {
                let mut total = 0;
                for m in 0..f.evse_count {
                    let (yc, ye) = (self.cable[fi][m][t], self.energy[fi][m][t]);
                    if yc > f.cables_per_evse {
                        problems.push(format!("facility {} charger {m} slot {t}: {yc} cables", f.id));
                    }
                    if ye > f.evse_max_energy {
                        problems.push(format!("facility {} charger {m} slot {t}: {ye} energy", f.id));
                    }
                    if yc != cable[fi][m][t] || ye != energy[fi][m][t] {
                        problems.push(format!(
                            "facility {} charger {m} slot {t}: demand does not match assignments",
                            f.id
                        ));
                    }
                    total += ye;
                }
                let yg = self.procurement[fi][t];
                if yg != total {
                    problems.push(format!(
                        "facility {} slot {t}: procurement {yg} != charger sum {total}",
                        f.id
                    ));
                }
                if f64::from(yg) > f.procurement_capacity(t) + UNIT_EPS {
                    problems.push(format!("facility {} slot {t}: procurement {yg} above s+G", f.id));
                }
            }
        }
        problems
    }
}
