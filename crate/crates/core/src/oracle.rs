//! Exact offline welfare maximization over the discrete option universe,
//! the dual objective evaluator and the empirical competitive ratio.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::model::{
    AllocationState, Decision, FacilityConfig, Instance, LevelSet, ScheduleOption, UserId, UserRequest, CURRENCY_EPS,
};
use crate::pricing::{
    cable_conjugate, cable_price, energy_conjugate, energy_price, operational_cost_at, procurement_conjugate_at,
    procurement_price, PricingError, ValuationBounds,
};
use crate::scheduler::{count_user_options, user_options, Pricer, SolarView};

/// Size guard for the offline solvers.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct OracleLimits {
    pub max_users: usize,
    /// Largest option universe allowed for a single user.
    pub max_options_per_user: usize,
    /// Search nodes before giving up.
    pub max_nodes: u64,
}

impl Default for OracleLimits {
    fn default() -> Self {
        Self {
            max_users: 12,
            max_options_per_user: 256,
            max_nodes: 200_000_000,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Error)]
pub enum OracleError {
    #[error(
        "instance too large: {users} users (limit {max_users}), largest option universe {max_options} \
         (limit {max_options_per_user})"
    )]
    TooLarge {
        users: usize,
        max_users: usize,
        max_options: u128,
        max_options_per_user: usize,
    },
    #[error("search gave up after {0} nodes")]
    NodeLimit(u64),
    #[error("{users} users but {universes} option lists")]
    Mismatch { users: usize, universes: usize },
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OfflineSolution {
    /// Accepted value minus the electricity cost added on top of the base state.
    pub welfare: f64,
    pub value: f64,
    pub cost: f64,
    pub assignment: Vec<(UserId, ScheduleOption)>,
    pub nodes: u64,
}

impl OfflineSolution {
    fn empty() -> Self {
        Self {
            welfare: 0.0,
            value: 0.0,
            cost: 0.0,
            assignment: Vec::new(),
            nodes: 0,
        }
    }
}

/// Resource demands while searching, starting from a base state.
#[derive(Clone)]
struct Demands {
    cable: Vec<Vec<Vec<u32>>>,
    energy: Vec<Vec<Vec<u32>>>,
    procurement: Vec<Vec<u32>>,
}

impl Demands {
    fn new(instance: &Instance, base: Option<&AllocationState>) -> Self {
        let h = instance.horizon();
        let fs = instance.facilities();
        let per_evse = |fi: usize, f: &FacilityConfig, energy: bool| -> Vec<Vec<u32>> {
            (0..f.evse_count)
                .map(|m| {
                    (0..h)
                        .map(|t| match base {
                            Some(s) if energy => s.energy_demand(fi, m, t),
                            Some(s) => s.cable_demand(fi, m, t),
                            None => 0,
                        })
                        .collect()
                })
                .collect()
        };
        Self {
            cable: fs.iter().enumerate().map(|(fi, f)| per_evse(fi, f, false)).collect(),
            energy: fs.iter().enumerate().map(|(fi, f)| per_evse(fi, f, true)).collect(),
            procurement: (0..fs.len())
                .map(|fi| {
                    (0..h)
                        .map(|t| base.map_or(0, |s| s.procurement_demand(fi, t)))
                        .collect()
                })
                .collect(),
        }
    }

    fn fits(&self, f: &FacilityConfig, fi: usize, o: &ScheduleOption) -> bool {
        o.evse < f.evse_count
            && o.schedule().all(|(t, e)| {
                self.cable[fi][o.evse][t] < f.cables_per_evse
                    && self.energy[fi][o.evse][t] + e <= f.evse_max_energy
                    && f64::from(self.procurement[fi][t] + e) <= f.procurement_capacity(t) + 1e-9
            })
    }

    /// Electricity cost added by `o` on top of the current demand.
    fn added_cost(&self, f: &FacilityConfig, fi: usize, o: &ScheduleOption) -> f64 {
        o.schedule()
            .filter(|&(_, e)| e > 0)
            .map(|(t, e)| {
                let y = self.procurement[fi][t];
                let cost =
                    |y: u32| operational_cost_at(f64::from(y), f.solar[t], f.transformer_limit[t], f.grid_price[t]);
                cost(y + e) - cost(y)
            })
            .sum()
    }

    fn apply(&mut self, fi: usize, o: &ScheduleOption, sign: i8) {
        for (t, e) in o.schedule() {
            if sign > 0 {
                self.cable[fi][o.evse][t] += 1;
                self.energy[fi][o.evse][t] += e;
                self.procurement[fi][t] += e;
            } else {
                self.cable[fi][o.evse][t] -= 1;
                self.energy[fi][o.evse][t] -= e;
                self.procurement[fi][t] -= e;
            }
        }
    }
}

struct Candidate {
    option: ScheduleOption,
    facility: usize,
    value: f64,
}

struct Branch {
    user: UserId,
    candidates: Vec<Candidate>,
    forced: bool,
}

struct Search<'a> {
    instance: &'a Instance,
    branches: Vec<Branch>,
    /// `suffix_bound[k]`: optimistic welfare of users `k..`.
    suffix_bound: Vec<f64>,
    prune: bool,
    symmetric: Vec<bool>,
    opened: Vec<usize>,
    demands: Demands,
    chosen: Vec<Option<usize>>,
    best: Option<(f64, f64, Vec<Option<usize>>)>,
    nodes: u64,
    max_nodes: u64,
}

impl Search<'_> {
    fn run(&mut self, k: usize, value: f64, cost: f64) -> Result<(), OracleError> {
        self.nodes += 1;
        if self.nodes > self.max_nodes {
            return Err(OracleError::NodeLimit(self.max_nodes));
        }
        let welfare = value - cost;
        if self.prune {
            if let Some((best, ..)) = &self.best {
                if welfare + self.suffix_bound[k] <= best + CURRENCY_EPS {
                    return Ok(());
                }
            }
        }
        if k == self.branches.len() {
            if self.best.as_ref().is_none_or(|(b, ..)| welfare > b + CURRENCY_EPS) {
                self.best = Some((welfare, cost, self.chosen.clone()));
            }
            return Ok(());
        }
        for i in 0..self.branches[k].candidates.len() {
            let c = &self.branches[k].candidates[i];
            let (fi, evse) = (c.facility, c.option.evse);
            let f = &self.instance.facilities()[fi];
            if self.symmetric[fi] && evse > self.opened[fi] {
                continue;
            }
            if !self.demands.fits(f, fi, &c.option) {
                continue;
            }
            let added = self.demands.added_cost(f, fi, &c.option);
            let v = c.value;
            let option = c.option.clone();
            let opened = self.opened[fi];
            self.opened[fi] = opened.max(evse + 1);
            self.demands.apply(fi, &option, 1);
            self.chosen[k] = Some(i);
            let result = self.run(k + 1, value + v, cost + added);
            self.chosen[k] = None;
            self.demands.apply(fi, &option, -1);
            self.opened[fi] = opened;
            result?;
        }
        if !self.branches[k].forced {
            self.run(k + 1, value, cost)?;
        }
        Ok(())
    }
}

fn check_size(
    users: &[UserRequest],
    universe: &[Vec<ScheduleOption>],
    limits: &OracleLimits,
) -> Result<(), OracleError> {
    if users.len() != universe.len() {
        return Err(OracleError::Mismatch {
            users: users.len(),
            universes: universe.len(),
        });
    }
    let max_options = universe.iter().map(Vec::len).max().unwrap_or(0);
    if users.len() > limits.max_users || max_options > limits.max_options_per_user {
        return Err(OracleError::TooLarge {
            users: users.len(),
            max_users: limits.max_users,
            max_options: max_options as u128,
            max_options_per_user: limits.max_options_per_user,
        });
    }
    Ok(())
}

/// Branch-and-bound over explicit option lists.
///
/// `universe[i]` lists the options of `users[i]`. Demands start from `base`
/// when given, and welfare counts only the electricity cost added on top of
/// it. When `forced` names a user, that user must be accepted; `Ok(None)`
/// then means no feasible solution exists.
///
/// Users are branched in order of descending maximum valuation, options in
/// order of descending standalone surplus, rejection last. The bound adds
/// each remaining user's best standalone surplus: electricity cost is convex,
/// so an option never costs less next to other demand than alone.
pub fn solve_options(
    instance: &Instance,
    users: &[UserRequest],
    universe: &[Vec<ScheduleOption>],
    base: Option<&AllocationState>,
    forced: Option<UserId>,
    limits: &OracleLimits,
) -> Result<Option<OfflineSolution>, OracleError> {
    check_size(users, universe, limits)?;
    let demands = Demands::new(instance, base);
    let mut order: Vec<usize> = (0..users.len()).collect();
    order.sort_by(|&a, &b| {
        let fa = Some(users[a].id) == forced;
        let fb = Some(users[b].id) == forced;
        fb.cmp(&fa)
            .then(users[b].max_valuation().total_cmp(&users[a].max_valuation()))
            .then(users[a].id.cmp(&users[b].id))
    });

    let mut branches = Vec::new();
    for &i in &order {
        let user = &users[i];
        let is_forced = Some(user.id) == forced;
        let mut scored: Vec<(f64, Candidate)> = Vec::new();
        for o in &universe[i] {
            let (Some(fi), Some(v)) = (instance.facility_index(o.facility), user.valuation(o.facility)) else {
                continue;
            };
            let f = &instance.facilities()[fi];
            if o.start != user.arrival_slot || o.end() != user.departure_slot || !demands.fits(f, fi, o) {
                continue;
            }
            let surplus = v - demands.added_cost(f, fi, o);
            // an option that cannot pay for itself alone never helps
            if is_forced || surplus > CURRENCY_EPS {
                scored.push((
                    surplus,
                    Candidate {
                        option: o.clone(),
                        facility: fi,
                        value: v,
                    },
                ));
            }
        }
        if is_forced && scored.is_empty() {
            return Ok(None);
        }
        scored.sort_by(|a, b| b.0.total_cmp(&a.0));
        branches.push((
            scored.first().map_or(0.0, |s| s.0),
            Branch {
                user: user.id,
                candidates: scored.into_iter().map(|s| s.1).collect(),
                forced: is_forced,
            },
        ));
    }
    let mut suffix_bound = vec![0.0; branches.len() + 1];
    for k in (0..branches.len()).rev() {
        let b = &branches[k];
        let gain = if b.1.forced { b.0 } else { b.0.max(0.0) };
        suffix_bound[k] = suffix_bound[k + 1] + gain;
    }
    let n = branches.len();
    let symmetric = (0..instance.facilities().len())
        .map(|fi| base.is_none_or(|s| s.facility_is_idle(fi)))
        .collect();
    let mut search = Search {
        instance,
        branches: branches.into_iter().map(|b| b.1).collect(),
        suffix_bound,
        prune: true,
        symmetric,
        opened: vec![0; instance.facilities().len()],
        demands,
        chosen: vec![None; n],
        best: None,
        nodes: 0,
        max_nodes: limits.max_nodes,
    };
    search.run(0, 0.0, 0.0)?;
    Ok(search.best.take().map(|(welfare, cost, chosen)| {
        let mut assignment: Vec<(UserId, ScheduleOption)> = chosen
            .iter()
            .enumerate()
            .filter_map(|(k, c)| c.map(|i| (search.branches[k].user, search.branches[k].candidates[i].option.clone())))
            .collect();
        assignment.sort_by_key(|a| a.0);
        OfflineSolution {
            welfare,
            value: welfare + cost,
            cost,
            assignment,
            nodes: search.nodes,
        }
    }))
}

/// Every user's option universe, checked against the size guard before
/// anything is enumerated.
pub fn option_universe(
    instance: &Instance,
    users: &[UserRequest],
    levels: LevelSet,
    limits: &OracleLimits,
) -> Result<Vec<Vec<ScheduleOption>>, OracleError> {
    let max_options = users
        .iter()
        .map(|u| count_user_options(u, instance, levels))
        .max()
        .unwrap_or(0);
    if users.len() > limits.max_users || max_options > limits.max_options_per_user as u128 {
        return Err(OracleError::TooLarge {
            users: users.len(),
            max_users: limits.max_users,
            max_options,
            max_options_per_user: limits.max_options_per_user,
        });
    }
    Ok(users
        .iter()
        .map(|u| user_options(u, instance, levels, limits.max_options_per_user))
        .collect())
}

/// Optimal offline welfare of the instance over its full option universe.
pub fn solve_offline(
    instance: &Instance,
    levels: LevelSet,
    limits: &OracleLimits,
) -> Result<OfflineSolution, OracleError> {
    let universe = option_universe(instance, instance.users(), levels, limits)?;
    Ok(
        solve_options(instance, instance.users(), &universe, None, None, limits)?
            .unwrap_or_else(OfflineSolution::empty),
    )
}

/// Plain enumeration of every combination of choices; a reference for the
/// branch-and-bound solver on tiny instances.
pub fn solve_exhaustive(
    instance: &Instance,
    users: &[UserRequest],
    universe: &[Vec<ScheduleOption>],
) -> Result<OfflineSolution, OracleError> {
    let combos: f64 = universe.iter().map(|u| (u.len() + 1) as f64).product();
    if users.len() > 6 || combos > 5e7 {
        return Err(OracleError::TooLarge {
            users: users.len(),
            max_users: 6,
            max_options: universe.iter().map(Vec::len).max().unwrap_or(0) as u128,
            max_options_per_user: universe.iter().map(Vec::len).max().unwrap_or(0),
        });
    }
    check_size(users, universe, &OracleLimits::default())?;
    let branches = users
        .iter()
        .zip(universe)
        .map(|(u, opts)| Branch {
            user: u.id,
            candidates: opts
                .iter()
                .filter_map(|o| {
                    Some(Candidate {
                        facility: instance.facility_index(o.facility)?,
                        value: u.valuation(o.facility)?,
                        option: o.clone(),
                    })
                })
                .collect(),
            forced: false,
        })
        .collect::<Vec<_>>();
    let n = branches.len();
    let mut search = Search {
        instance,
        branches,
        suffix_bound: vec![0.0; n + 1],
        prune: false,
        symmetric: vec![false; instance.facilities().len()],
        opened: vec![0; instance.facilities().len()],
        demands: Demands::new(instance, None),
        chosen: vec![None; n],
        best: None,
        nodes: 0,
        max_nodes: u64::MAX,
    };
    search.run(0, 0.0, 0.0)?;
    let (welfare, cost, chosen) = search.best.take().expect("rejecting everyone is always feasible");
    let mut assignment: Vec<(UserId, ScheduleOption)> = chosen
        .iter()
        .enumerate()
        .filter_map(|(k, c)| c.map(|i| (search.branches[k].user, search.branches[k].candidates[i].option.clone())))
        .collect();
    assignment.sort_by_key(|a| a.0);
    Ok(OfflineSolution {
        welfare,
        value: welfare + cost,
        cost,
        assignment,
        nodes: search.nodes,
    })
}

/// Dual prices per resource: `[facility][charger][slot]` for cables and
/// charger energy, `[facility][slot]` for procurement.
#[derive(Debug, Clone, PartialEq)]
pub struct DualPrices {
    pub cable: Vec<Vec<Vec<f64>>>,
    pub energy: Vec<Vec<Vec<f64>>>,
    pub procurement: Vec<Vec<f64>>,
}

impl DualPrices {
    pub fn zero(instance: &Instance) -> Self {
        let h = instance.horizon();
        let per_evse = |f: &FacilityConfig| vec![vec![0.0; h]; f.evse_count];
        Self {
            cable: instance.facilities().iter().map(per_evse).collect(),
            energy: instance.facilities().iter().map(per_evse).collect(),
            procurement: vec![vec![0.0; h]; instance.facilities().len()],
        }
    }

    /// Marginal prices at the demands of `state`, realized solar.
    pub fn at_state(
        instance: &Instance,
        state: &AllocationState,
        bounds: &ValuationBounds,
    ) -> Result<Self, PricingError> {
        let mut p = Self::zero(instance);
        for (fi, f) in instance.facilities().iter().enumerate() {
            for t in 0..instance.horizon() {
                for m in 0..f.evse_count {
                    p.cable[fi][m][t] = cable_price(f64::from(state.cable_demand(fi, m, t)), f, bounds)?;
                    p.energy[fi][m][t] = energy_price(f64::from(state.energy_demand(fi, m, t)), f, bounds)?;
                }
                p.procurement[fi][t] = procurement_price(f64::from(state.procurement_demand(fi, t)), t, f, bounds)?;
            }
        }
        Ok(p)
    }

    /// `sum_t c(t) p_c(t) + e(t) (p_e(t) + p_g(t))` for one option.
    pub fn option_cost(&self, instance: &Instance, option: &ScheduleOption) -> f64 {
        let fi = instance
            .facility_index(option.facility)
            .expect("option facility belongs to the instance");
        option
            .schedule()
            .map(|(t, e)| {
                self.cable[fi][option.evse][t]
                    + f64::from(e) * (self.energy[fi][option.evse][t] + self.procurement[fi][t])
            })
            .sum()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualViolation {
    /// Index into the user list.
    pub user: usize,
    /// Index into that user's option list.
    pub option: usize,
    /// `u_n - (v - cost)`; negative.
    pub slack: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DualReport {
    pub objective: f64,
    pub utility_term: f64,
    pub cable_term: f64,
    pub energy_term: f64,
    pub procurement_term: f64,
    /// Number of (user, option) pairs checked for `u_n >= v - cost`.
    pub checked: usize,
    pub violations: Vec<DualViolation>,
}

impl DualReport {
    pub fn feasible(&self) -> bool {
        self.violations.is_empty()
    }
}

/// Dual objective `sum u_n + sum conjugates` at the given prices, plus a
/// check of `u_n >= v - cost(o)` for every option in `universe`.
///
/// `utilities[i]` belongs to `users[i]` and `universe[i]` lists its options.
pub fn evaluate_dual(
    instance: &Instance,
    prices: &DualPrices,
    utilities: &[f64],
    users: &[UserRequest],
    universe: &[Vec<ScheduleOption>],
) -> Result<DualReport, PricingError> {
    if let Some(&u) = utilities.iter().find(|&&u| u < 0.0) {
        return Err(PricingError::NegativePrice(u));
    }
    let mut report = DualReport {
        objective: 0.0,
        utility_term: utilities.iter().sum(),
        cable_term: 0.0,
        energy_term: 0.0,
        procurement_term: 0.0,
        checked: 0,
        violations: Vec::new(),
    };
    for (fi, f) in instance.facilities().iter().enumerate() {
        for t in 0..instance.horizon() {
            for m in 0..f.evse_count {
                report.cable_term += cable_conjugate(prices.cable[fi][m][t], f)?;
                report.energy_term += energy_conjugate(prices.energy[fi][m][t], f)?;
            }
            report.procurement_term += procurement_conjugate_at(
                prices.procurement[fi][t],
                f.solar[t],
                f.transformer_limit[t],
                f.grid_price[t],
            )?;
        }
    }
    report.objective = report.utility_term + report.cable_term + report.energy_term + report.procurement_term;
    for (i, (user, options)) in users.iter().zip(universe).enumerate() {
        let u = utilities.get(i).copied().unwrap_or(0.0);
        for (j, o) in options.iter().enumerate() {
            let Some(v) = user.valuation(o.facility) else {
                continue;
            };
            report.checked += 1;
            let slack = u - (v - prices.option_cost(instance, o));
            if slack < -CURRENCY_EPS {
                report.violations.push(DualViolation {
                    user: i,
                    option: j,
                    slack,
                });
            }
        }
    }
    Ok(report)
}

/// For every user of `instance` (in order) and every option in its list,
/// whether the option fit the remaining headroom when that user arrived.
///
/// Replays `decisions`, which must follow the instance's user order.
pub fn feasible_at_arrival(
    instance: &Instance,
    decisions: &[Decision],
    bounds: &ValuationBounds,
    levels: LevelSet,
    universe: &[Vec<ScheduleOption>],
) -> Vec<Vec<bool>> {
    let mut state = AllocationState::new(instance);
    let mut out = Vec::with_capacity(universe.len());
    for (d, options) in decisions.iter().zip(universe) {
        let pricer = Pricer::new(instance, &state, bounds, SolarView::Realized);
        out.push(options.iter().map(|o| pricer.admits(o, levels)).collect());
        if let Some(o) = &d.option {
            state
                .commit(instance, d.user, o.clone(), d.payment.unwrap_or(0.0))
                .expect("replaying committed decisions");
        }
    }
    out
}

/// Offline over online welfare: 1 when both vanish, infinite when only the
/// online welfare does.
pub fn empirical_ratio(offline_welfare: f64, online_welfare: f64) -> f64 {
    if online_welfare <= CURRENCY_EPS {
        if offline_welfare <= CURRENCY_EPS {
            1.0
        } else {
            f64::INFINITY
        }
    } else {
        offline_welfare / online_welfare
    }
}
