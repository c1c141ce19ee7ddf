//! Comparison controllers: first-come-first-serve and a certainty-equivalent
//! controller that plans against one deterministic expected future.

use serde::{Deserialize, Serialize};

use crate::mechanism::{RunOutcome, WelfareSummary};
use crate::model::{
    AllocationError, AllocationState, Decision, FacilityId, Instance, LevelSet, ScheduleOption, UserId, UserRequest,
    CURRENCY_EPS, UNIT_EPS,
};
use crate::oracle::{solve_options, OfflineSolution, OracleError, OracleLimits};
use crate::pricing::operational_cost_at;
use crate::scheduler::{charge_vectors, count_options};

/// Value credited to a user who leaves with less energy than requested.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum PartialCharge {
    /// `v * delivered / requested`.
    #[default]
    ProRated,
    /// `v` only for a full charge, 0 otherwise.
    AllOrNothing,
}

/// First-come-first-serve: park at the first free cable, charge immediately.
///
/// A user is admitted iff some cable at a preferred facility is free for the
/// whole stay; the lowest (facility, charger, cable) wins. A charger serves
/// one vehicle per slot, earlier arrivals first, at its full rate, subject to
/// the facility's `s + G` procurement limit. Nobody pays. Admitted users may
/// leave with a partial charge, or none at all, so an admission can carry
/// zero utility.
#[derive(Debug, Clone)]
pub struct Fcfs<'a> {
    instance: &'a Instance,
    partial: PartialCharge,
    state: AllocationState,
    /// `[facility][charger][cable][slot]`.
    occupied: Vec<Vec<Vec<Vec<bool>>>>,
    spots: Vec<(UserId, FacilityId, usize, usize)>,
    decisions: Vec<Decision>,
}

impl<'a> Fcfs<'a> {
    pub fn new(instance: &'a Instance, partial: PartialCharge) -> Self {
        let h = instance.horizon();
        Self {
            instance,
            partial,
            state: AllocationState::new(instance),
            occupied: instance
                .facilities()
                .iter()
                .map(|f| vec![vec![vec![false; h]; f.cables_per_evse as usize]; f.evse_count])
                .collect(),
            spots: Vec::new(),
            decisions: Vec::new(),
        }
    }

    pub fn state(&self) -> &AllocationState {
        &self.state
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    /// Parking spot `(facility, charger, cable)` of every admitted user.
    pub fn spots(&self) -> &[(UserId, FacilityId, usize, usize)] {
        &self.spots
    }

    /// First free `(facility index, charger, cable)` for the user's stay.
    pub fn free_spot(&self, user: &UserRequest) -> Option<(usize, usize, usize)> {
        for l in user.preferred() {
            let Some(fi) = self.instance.facility_index(l) else {
                continue;
            };
            for (m, cables) in self.occupied[fi].iter().enumerate() {
                for (k, slots) in cables.iter().enumerate() {
                    if user.window().all(|t| !slots[t]) {
                        return Some((fi, m, k));
                    }
                }
            }
        }
        None
    }

    pub fn process_arrival(&mut self, user: &UserRequest) -> Result<Decision, AllocationError> {
        let Some((fi, m, k)) = self.free_spot(user) else {
            let d = Decision::rejected(user.id);
            self.decisions.push(d.clone());
            return Ok(d);
        };
        let f = &self.instance.facilities()[fi];
        let mut remaining = user.energy;
        let mut charge = Vec::with_capacity(user.stay_len());
        for t in user.window() {
            // one active cable per charger: earlier arrivals keep their slots
            let idle = self.state.energy_demand(fi, m, t) == 0;
            let headroom =
                (f.procurement_capacity(t) + UNIT_EPS).floor() - f64::from(self.state.procurement_demand(fi, t));
            let e = if idle {
                f.evse_max_energy.min(remaining).min(headroom.max(0.0) as u32)
            } else {
                0
            };
            remaining -= e;
            charge.push(e);
        }
        let option = ScheduleOption {
            facility: f.id,
            evse: m,
            start: user.arrival_slot,
            charge,
        };
        let delivered = option.total_energy();
        let v = user.valuation(f.id).expect("spot is at a preferred facility");
        let utility = match self.partial {
            PartialCharge::ProRated => v * f64::from(delivered) / f64::from(user.energy),
            PartialCharge::AllOrNothing if delivered == user.energy => v,
            PartialCharge::AllOrNothing => 0.0,
        };
        self.state.commit(self.instance, user.id, option.clone(), 0.0)?;
        for t in user.window() {
            self.occupied[fi][m][k][t] = true;
        }
        self.spots.push((user.id, f.id, m, k));
        let d = Decision {
            user: user.id,
            utility,
            option: Some(option),
            payment: Some(0.0),
        };
        self.decisions.push(d.clone());
        Ok(d)
    }

    pub fn finish(self) -> RunOutcome {
        let summary = WelfareSummary::compute(self.instance, &self.state, &self.decisions);
        RunOutcome {
            procurement_revenue: vec![vec![0.0; self.instance.horizon()]; self.instance.facilities().len()],
            state: self.state,
            decisions: self.decisions,
            summary,
        }
    }
}

/// Users processed in order of arrival slot (ties by stored order).
pub fn run_fcfs(instance: &Instance, partial: PartialCharge) -> Result<RunOutcome, AllocationError> {
    let mut order: Vec<&UserRequest> = instance.users().iter().collect();
    order.sort_by_key(|u| u.arrival_slot);
    let mut fcfs = Fcfs::new(instance, partial);
    for u in order {
        fcfs.process_arrival(u)?;
    }
    Ok(fcfs.finish())
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CecConfig {
    pub levels: LevelSet,
    /// Most expected future arrivals considered per decision.
    pub lookahead: usize,
    /// Per-charger option count up to which every schedule is a candidate;
    /// larger universes fall back to a few heuristic schedules.
    pub exhaustive_below: usize,
    pub limits: OracleLimits,
}

impl Default for CecConfig {
    fn default() -> Self {
        Self {
            levels: LevelSet::unrestricted(),
            lookahead: 5,
            exhaustive_below: 8,
            limits: OracleLimits {
                max_users: 12,
                max_options_per_user: 512,
                max_nodes: 200_000,
            },
        }
    }
}

/// Candidate schedules for the certainty-equivalent planner: the full
/// universe per charger when small, otherwise a solar-first schedule that
/// places each unit where it adds the least electricity cost given `state`,
/// plus an as-soon-as-possible schedule.
pub fn candidate_options(
    user: &UserRequest,
    instance: &Instance,
    state: &AllocationState,
    levels: LevelSet,
    exhaustive_below: usize,
) -> Vec<ScheduleOption> {
    let mut out = Vec::new();
    for l in user.preferred() {
        let Some(fi) = instance.facility_index(l) else {
            continue;
        };
        let f = &instance.facilities()[fi];
        let cap = levels.cap(f.evse_max_energy);
        let w = user.stay_len();
        let small = count_options(user.energy, w, cap) <= exhaustive_below as u128;
        for m in 0..f.evse_count {
            let free = user.window().all(|t| state.cable_demand(fi, m, t) < f.cables_per_evse);
            if !free {
                continue;
            }
            let mut push = |charge: Vec<u32>| {
                let o = ScheduleOption {
                    facility: l,
                    evse: m,
                    start: user.arrival_slot,
                    charge,
                };
                if !out.contains(&o) {
                    out.push(o);
                }
            };
            if small {
                for c in charge_vectors(user.energy, w, cap, exhaustive_below) {
                    push(c);
                }
                continue;
            }
            let headroom: Vec<u32> = user
                .window()
                .map(|t| {
                    let g = (f.procurement_capacity(t) + UNIT_EPS).floor() - f64::from(state.procurement_demand(fi, t));
                    cap.min(f.evse_max_energy - state.energy_demand(fi, m, t))
                        .min(g.max(0.0) as u32)
                })
                .collect();
            // solar first: each unit to the slot with the lowest added cost
            let mut charge = vec![0u32; w];
            let mut placed = 0;
            while placed < user.energy {
                let mut best: Option<(f64, usize)> = None;
                for (i, t) in user.window().enumerate() {
                    if charge[i] >= headroom[i] {
                        continue;
                    }
                    let y = f64::from(state.procurement_demand(fi, t) + charge[i]);
                    let cost = |y: f64| operational_cost_at(y, f.solar[t], f.transformer_limit[t], f.grid_price[t]);
                    let added = cost(y + 1.0) - cost(y);
                    if best.is_none_or(|(b, _)| added < b - CURRENCY_EPS) {
                        best = Some((added, i));
                    }
                }
                let Some((_, i)) = best else { break };
                charge[i] += 1;
                placed += 1;
            }
            if placed == user.energy {
                push(charge);
            }
            // as soon as possible
            let mut charge = vec![0u32; w];
            let mut rest = user.energy;
            for (i, &h) in headroom.iter().enumerate() {
                charge[i] = h.min(rest);
                rest -= charge[i];
            }
            if rest == 0 {
                push(charge);
            }
        }
    }
    out
}

/// Certainty-equivalent controller.
///
/// For each arrival it solves the offline problem over the committed state,
/// the arrival and the next expected arrivals, once with the arrival forced
/// in and once without it, and admits when forcing it in does strictly
/// better. The admitted user is given the schedule from the forced solve.
/// Nobody pays; an admitted user's utility is its valuation.
#[derive(Debug, Clone)]
pub struct Cec<'a> {
    instance: &'a Instance,
    expected: Vec<UserRequest>,
    config: CecConfig,
    state: AllocationState,
    decisions: Vec<Decision>,
}

impl<'a> Cec<'a> {
    /// `expected` is the deterministic forecast trace; its user ids must not
    /// clash with real arrivals.
    pub fn new(instance: &'a Instance, mut expected: Vec<UserRequest>, config: CecConfig) -> Self {
        expected.sort_by_key(|u| (u.submission_slot, u.arrival_slot, u.id));
        Self {
            instance,
            expected,
            config,
            state: AllocationState::new(instance),
            decisions: Vec::new(),
        }
    }

    pub fn state(&self) -> &AllocationState {
        &self.state
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    pub fn process_arrival(&mut self, user: &UserRequest) -> Result<Decision, CecError> {
        let mut lookahead = self.config.lookahead;
        let with = loop {
            match self.plan(user, lookahead) {
                Err(CecError::Oracle(OracleError::NodeLimit(_))) if lookahead > 0 => lookahead /= 2,
                other => break other?,
            }
        };
        let decision = match with {
            Some(sol) => {
                let option = sol
                    .assignment
                    .iter()
                    .find(|(id, _)| *id == user.id)
                    .map(|(_, o)| o.clone())
                    .expect("forced user is assigned");
                let v = user.valuation(option.facility).expect("option at a preferred facility");
                self.state.commit(self.instance, user.id, option.clone(), 0.0)?;
                Decision {
                    user: user.id,
                    utility: v,
                    option: Some(option),
                    payment: Some(0.0),
                }
            }
            None => Decision::rejected(user.id),
        };
        self.decisions.push(decision.clone());
        Ok(decision)
    }

    /// Best plan with `user` forced in, when it beats the plan without it,
    /// over the next `lookahead` expected arrivals.
    fn plan(&self, user: &UserRequest, lookahead: usize) -> Result<Option<OfflineSolution>, CecError> {
        let now = user.submission_slot;
        let future: Vec<UserRequest> = self
            .expected
            .iter()
            .filter(|u| u.submission_slot > now)
            .take(lookahead)
            .cloned()
            .collect();
        let options = |u: &UserRequest| {
            candidate_options(
                u,
                self.instance,
                &self.state,
                self.config.levels,
                self.config.exhaustive_below,
            )
        };
        let future_options: Vec<Vec<ScheduleOption>> = future.iter().map(options).collect();
        let without = solve_options(
            self.instance,
            &future,
            &future_options,
            Some(&self.state),
            None,
            &self.config.limits,
        )?
        .map_or(0.0, |s| s.welfare);

        let mut users = vec![user.clone()];
        users.extend(future.iter().cloned());
        let mut universe = vec![options(user)];
        universe.extend(future_options);
        let with = solve_options(
            self.instance,
            &users,
            &universe,
            Some(&self.state),
            Some(user.id),
            &self.config.limits,
        )?;
        Ok(with.filter(|sol| sol.welfare > without + CURRENCY_EPS))
    }

    pub fn finish(self) -> RunOutcome {
        let summary = WelfareSummary::compute(self.instance, &self.state, &self.decisions);
        RunOutcome {
            procurement_revenue: vec![vec![0.0; self.instance.horizon()]; self.instance.facilities().len()],
            state: self.state,
            decisions: self.decisions,
            summary,
        }
    }
}

#[derive(Debug, thiserror::Error)]
pub enum CecError {
    #[error(transparent)]
    Oracle(#[from] OracleError),
    #[error(transparent)]
    Allocation(#[from] AllocationError),
}

pub fn run_cec(instance: &Instance, expected: Vec<UserRequest>, config: CecConfig) -> Result<RunOutcome, CecError> {
    let mut cec = Cec::new(instance, expected, config);
    for u in instance.users() {
        cec.process_arrival(u)?;
    }
    Ok(cec.finish())
}
