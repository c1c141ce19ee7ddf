//! Posted-price quotes and schedule-option generation.
//!
//! [`Pricer`] is a frozen view of the marginal prices implied by an
//! [`AllocationState`]; [`best_option`] finds a user's surplus-maximizing
//! option against it without enumerating schedules. [`enumerate_options`]
//! lists the discrete option universe for the offline solvers and tests.

use crate::model::{
    AllocationState, FacilityConfig, Instance, LevelSet, ScheduleOption, UserRequest, CURRENCY_EPS, UNIT_EPS,
};
use crate::pricing::{cable_price, energy_price, procurement_price_at, SolarForecast, ValuationBounds};

/// Which solar level the procurement prices and headroom are based on.
#[derive(Debug, Clone, Copy)]
pub enum SolarView<'a> {
    /// The realized production `s(t)`.
    Realized,
    /// The forecast floor `lower(t, t_current)`, one forecast per facility in
    /// instance order.
    Forecast {
        forecasts: &'a [SolarForecast],
        t_current: usize,
    },
}

/// Marginal prices and headroom frozen at one allocation state.
#[derive(Debug, Clone, Copy)]
pub struct Pricer<'a> {
    instance: &'a Instance,
    state: &'a AllocationState,
    bounds: &'a ValuationBounds,
    solar: SolarView<'a>,
}

impl<'a> Pricer<'a> {
    pub fn new(
        instance: &'a Instance,
        state: &'a AllocationState,
        bounds: &'a ValuationBounds,
        solar: SolarView<'a>,
    ) -> Self {
        Self {
            instance,
            state,
            bounds,
            solar,
        }
    }

    pub fn instance(&self) -> &'a Instance {
        self.instance
    }

    pub fn state(&self) -> &'a AllocationState {
        self.state
    }

    fn facility(&self, fi: usize) -> &'a FacilityConfig {
        &self.instance.facilities()[fi]
    }

    /// Solar level used for pricing slot `t` at facility index `fi`.
    pub fn solar(&self, fi: usize, t: usize) -> f64 {
        match self.solar {
            SolarView::Realized => self.facility(fi).solar[t],
            SolarView::Forecast { forecasts, t_current } => forecasts[fi].lower(t, t_current.min(t)),
        }
    }

    pub fn cable(&self, fi: usize, m: usize, t: usize) -> f64 {
        let y = f64::from(self.state.cable_demand(fi, m, t));
        cable_price(y, self.facility(fi), self.bounds).unwrap_or_else(|_| self.bounds.exhausted_price())
    }

    pub fn energy(&self, fi: usize, m: usize, t: usize) -> f64 {
        let y = f64::from(self.state.energy_demand(fi, m, t));
        energy_price(y, self.facility(fi), self.bounds).unwrap_or_else(|_| self.bounds.exhausted_price())
    }

    pub fn procurement(&self, fi: usize, t: usize) -> f64 {
        let f = self.facility(fi);
        procurement_price_at(
            f64::from(self.state.procurement_demand(fi, t)),
            self.solar(fi, t),
            f.transformer_limit[t],
            f.grid_price[t],
            self.bounds,
        )
        .unwrap_or_else(|_| self.bounds.exhausted_price())
    }

    /// Whole units the facility can still procure in slot `t` under the
    /// solar level this view prices with.
    pub fn procurement_headroom(&self, fi: usize, t: usize) -> u32 {
        let f = self.facility(fi);
        let cap = self.solar(fi, t) + f.transformer_limit[t] + UNIT_EPS;
        let free = cap.floor() - f64::from(self.state.procurement_demand(fi, t));
        free.max(0.0) as u32
    }

    /// Whole units charger `m` can still deliver in slot `t`.
    pub fn energy_headroom(&self, fi: usize, m: usize, t: usize) -> u32 {
        self.facility(fi)
            .evse_max_energy
            .saturating_sub(self.state.energy_demand(fi, m, t))
    }

    pub fn cable_free(&self, fi: usize, m: usize, t: usize) -> bool {
        self.state.cable_demand(fi, m, t) < self.facility(fi).cables_per_evse
    }

    /// Posted cost of `option`: cable-slots at the cable price plus each
    /// energy unit at the charger plus procurement price of its slot.
    pub fn option_cost(&self, option: &ScheduleOption) -> f64 {
        let fi = self
            .instance
            .facility_index(option.facility)
            .expect("option facility belongs to the instance");
        option
            .schedule()
            .map(|(t, e)| {
                let unit = if e > 0 {
                    f64::from(e) * (self.energy(fi, option.evse, t) + self.procurement(fi, t))
                } else {
                    0.0
                };
                self.cable(fi, option.evse, t) + unit
            })
            .sum()
    }

    /// Procurement part of [`Pricer::option_cost`], per slot.
    pub fn procurement_charges(&self, option: &ScheduleOption) -> Vec<(usize, f64)> {
        let fi = self
            .instance
            .facility_index(option.facility)
            .expect("option facility belongs to the instance");
        option
            .schedule()
            .filter(|&(_, e)| e > 0)
            .map(|(t, e)| (t, f64::from(e) * self.procurement(fi, t)))
            .collect()
    }

    /// Whether `option` fits the remaining headroom seen by this view.
    pub fn admits(&self, option: &ScheduleOption, levels: LevelSet) -> bool {
        let Some(fi) = self.instance.facility_index(option.facility) else {
            return false;
        };
        let f = self.facility(fi);
        if option.evse >= f.evse_count || option.end() >= self.instance.horizon() {
            return false;
        }
        let level_cap = levels.cap(f.evse_max_energy);
        option.schedule().all(|(t, e)| {
            self.cable_free(fi, option.evse, t)
                && e <= level_cap
                && e <= self.energy_headroom(fi, option.evse, t)
                && e <= self.procurement_headroom(fi, t)
        })
    }
}

/// The best option a user can buy at posted prices.
#[derive(Debug, Clone, PartialEq)]
pub struct Quote {
    /// `max(0, v - cost)` over all options; 0 when nothing is feasible.
    pub utility: f64,
    pub option: Option<ScheduleOption>,
    /// Posted cost of `option` (0 without one).
    pub payment: f64,
}

impl Quote {
    fn none() -> Self {
        Self {
            utility: 0.0,
            option: None,
            payment: 0.0,
        }
    }

    /// Whether the user would be admitted: strictly positive surplus.
    pub fn admits(&self) -> bool {
        self.option.is_some() && self.utility > CURRENCY_EPS
    }
}

/// Cheapest charge schedule at one charger, or `None` if the request does not fit.
///
/// Slots are filled in order of per-unit price, earliest first on ties, each
/// up to its headroom. With prices fixed this greedy is exact, and among
/// equal-cost schedules it returns the most front-loaded one.
fn cheapest_schedule(
    user: &UserRequest,
    pricer: &Pricer<'_>,
    fi: usize,
    m: usize,
    level_cap: u32,
) -> Option<(Vec<u32>, f64)> {
    let window: Vec<usize> = user.window().collect();
    if window.iter().any(|&t| !pricer.cable_free(fi, m, t)) {
        return None;
    }
    let mut slots: Vec<(f64, usize, u32)> = window
        .iter()
        .enumerate()
        .map(|(i, &t)| {
            let headroom = level_cap
                .min(pricer.energy_headroom(fi, m, t))
                .min(pricer.procurement_headroom(fi, t));
            (pricer.energy(fi, m, t) + pricer.procurement(fi, t), i, headroom)
        })
        .collect();
    slots.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));

    let mut charge = vec![0u32; window.len()];
    let mut remaining = user.energy;
    let mut cost: f64 = window.iter().map(|&t| pricer.cable(fi, m, t)).sum();
    for (unit_price, i, headroom) in slots {
        if remaining == 0 {
            break;
        }
        let e = headroom.min(remaining);
        if e > 0 {
            charge[i] = e;
            remaining -= e;
            cost += f64::from(e) * unit_price;
        }
    }
    (remaining == 0).then_some((charge, cost))
}

/// Surplus-maximizing option for `user` at the prices of `pricer`.
///
/// Ties within [`CURRENCY_EPS`] go to the lowest facility id, then the lowest
/// charger, then the most front-loaded schedule.
pub fn best_option(user: &UserRequest, pricer: &Pricer<'_>, levels: LevelSet) -> Quote {
    let instance = pricer.instance();
    let mut best = Quote::none();
    let mut best_surplus = f64::NEG_INFINITY;
    for (&l, &v) in &user.valuations {
        let Some(fi) = instance.facility_index(l) else {
            continue;
        };
        let f = &instance.facilities()[fi];
        let level_cap = levels.cap(f.evse_max_energy);
        for m in 0..f.evse_count {
            let Some((charge, cost)) = cheapest_schedule(user, pricer, fi, m, level_cap) else {
                continue;
            };
            let surplus = v - cost;
            if surplus > best_surplus + CURRENCY_EPS {
                best_surplus = surplus;
                best = Quote {
                    utility: surplus.max(0.0),
                    option: Some(ScheduleOption {
                        facility: l,
                        evse: m,
                        start: user.arrival_slot,
                        charge,
                    }),
                    payment: cost,
                };
            }
        }
    }
    if best_surplus > 0.0 {
        best
    } else {
        Quote { utility: 0.0, ..best }
    }
}

/// Charge vectors of length `slots` summing to `energy` with parts in
/// `0..=level_cap`, most front-loaded first, at most `cap` of them.
pub fn charge_vectors(energy: u32, slots: usize, level_cap: u32, cap: usize) -> Vec<Vec<u32>> {
    fn walk(rest: u32, i: usize, level_cap: u32, cur: &mut Vec<u32>, out: &mut Vec<Vec<u32>>, cap: usize) {
        if out.len() >= cap {
            return;
        }
        let slots = cur.len();
        if i + 1 == slots {
            if rest <= level_cap {
                cur[i] = rest;
                out.push(cur.clone());
            }
            return;
        }
        let later = u64::from(level_cap) * (slots - i - 1) as u64;
        let lo = u64::from(rest).saturating_sub(later) as u32;
        let hi = level_cap.min(rest);
        if lo > hi {
            return;
        }
        for e in (lo..=hi).rev() {
            cur[i] = e;
            walk(rest - e, i + 1, level_cap, cur, out, cap);
            if out.len() >= cap {
                return;
            }
        }
    }

    let mut out = Vec::new();
    if slots == 0 || cap == 0 {
        return out;
    }
    let mut cur = vec![0; slots];
    walk(energy, 0, level_cap, &mut cur, &mut out, cap);
    out
}

/// Number of charge vectors [`charge_vectors`] would produce without a cap.
pub fn count_options(energy: u32, slots: usize, level_cap: u32) -> u128 {
    let h = energy as usize;
    let mut ways = vec![0u128; h + 1];
    ways[0] = 1;
    for _ in 0..slots {
        let mut next = vec![0u128; h + 1];
        for (total, &w) in ways.iter().enumerate() {
            if w == 0 {
                continue;
            }
            for e in 0..=(level_cap as usize).min(h - total) {
                next[total + e] = next[total + e].saturating_add(w);
            }
        }
        ways = next;
    }
    ways[h]
}

/// Every option of `user` at `facility`: each charger times each charge
/// vector, chargers in index order, at most `cap` options in total.
pub fn enumerate_options(
    user: &UserRequest,
    facility: &FacilityConfig,
    levels: LevelSet,
    cap: usize,
) -> Vec<ScheduleOption> {
    if user.valuation(facility.id).is_none() {
        return Vec::new();
    }
    let vectors = charge_vectors(user.energy, user.stay_len(), levels.cap(facility.evse_max_energy), cap);
    let mut out = Vec::new();
    'outer: for m in 0..facility.evse_count {
        for charge in &vectors {
            if out.len() >= cap {
                break 'outer;
            }
            out.push(ScheduleOption {
                facility: facility.id,
                evse: m,
                start: user.arrival_slot,
                charge: charge.clone(),
            });
        }
    }
    out
}

/// Options of `user` over all its preferred facilities, in facility-id order.
pub fn user_options(user: &UserRequest, instance: &Instance, levels: LevelSet, cap: usize) -> Vec<ScheduleOption> {
    let mut out = Vec::new();
    for l in user.preferred() {
        if let Some(f) = instance.facility(l) {
            out.extend(enumerate_options(user, f, levels, cap.saturating_sub(out.len())));
        }
    }
    out
}

/// Size of the option universe of `user` without a cap.
pub fn count_user_options(user: &UserRequest, instance: &Instance, levels: LevelSet) -> u128 {
    user.preferred()
        .filter_map(|l| instance.facility(l))
        .map(|f| count_options(user.energy, user.stay_len(), levels.cap(f.evse_max_energy)) * f.evse_count as u128)
        .sum()
}
