//! The online posted-price mechanism.
//!
//! Arrivals are processed one at a time. Each user is quoted the best option
//! at the prices implied by the current demands; a strictly positive surplus
//! admits the user, who pays the posted cost of that option. Admissions are
//! never revoked.

use std::collections::BTreeSet;

use serde::Serialize;
use thiserror::Error;

use crate::model::{AllocationError, AllocationState, Decision, Instance, LevelSet, UserId, UserRequest};
use crate::pricing::{operational_cost, PricingError, SolarForecast, ValuationBounds};
use crate::scheduler::{best_option, Pricer, Quote, SolarView};

/// How procurement prices treat solar production.
#[derive(Debug, Clone, PartialEq)]
pub enum ForecastMode {
    /// Prices use realized solar.
    Perfect,
    /// Prices use the forecast floor known at each user's submission slot;
    /// one forecast per facility in instance order.
    Interval(Vec<SolarForecast>),
}

#[derive(Debug, Error)]
pub enum MechanismError {
    #[error(transparent)]
    Pricing(#[from] PricingError),
    #[error("capacity fault while committing an admitted user: {0}")]
    Fault(#[from] AllocationError),
    #[error("user {0} was already processed")]
    Duplicate(UserId),
    #[error("user {user}: {reason}")]
    InvalidUser { user: UserId, reason: String },
    #[error("user {user} submitted at slot {submitted}, before the previous arrival at {previous}")]
    OutOfOrder {
        user: UserId,
        submitted: usize,
        previous: usize,
    },
    #[error("expected one forecast per facility ({expected}), got {got}")]
    ForecastCount { expected: usize, got: usize },
}

/// Welfare accounting for one run.
#[derive(Debug, Clone, Copy, PartialEq, Default, Serialize)]
pub struct WelfareSummary {
    pub arrivals: usize,
    pub admitted: usize,
    /// Value realized by admitted users (utility plus payment).
    pub gross_value: f64,
    /// Electricity cost at the final procurement demand, realized solar.
    pub operational_cost: f64,
    /// `gross_value - operational_cost`.
    pub welfare: f64,
    pub total_utility: f64,
    pub total_payments: f64,
    pub energy_delivered: f64,
    /// Energy served from behind-the-meter solar.
    pub solar_used: f64,
    pub solar_available: f64,
}

impl WelfareSummary {
    pub fn compute(instance: &Instance, state: &AllocationState, decisions: &[Decision]) -> Self {
        let mut s = Self {
            arrivals: decisions.len(),
            ..Self::default()
        };
        for d in decisions.iter().filter(|d| d.accepted()) {
            let payment = d.payment.unwrap_or(0.0);
            s.admitted += 1;
            s.total_utility += d.utility;
            s.total_payments += payment;
            s.gross_value += d.utility + payment;
        }
        for (fi, f) in instance.facilities().iter().enumerate() {
            for t in 0..instance.horizon() {
                let y = f64::from(state.procurement_demand(fi, t));
                s.operational_cost += operational_cost(y, t, f);
                s.energy_delivered += y;
                s.solar_used += y.min(f.solar[t]);
                s.solar_available += f.solar[t];
            }
        }
        s.welfare = s.gross_value - s.operational_cost;
        s
    }

    /// Fraction of available solar that was consumed on site.
    pub fn solar_utilization(&self) -> f64 {
        if self.solar_available > 0.0 {
            self.solar_used / self.solar_available
        } else {
            0.0
        }
    }
}

/// State machine for one run of the mechanism over one instance.
#[derive(Debug, Clone)]
pub struct OnlineMechanism<'a> {
    instance: &'a Instance,
    bounds: ValuationBounds,
    levels: LevelSet,
    forecast: ForecastMode,
    state: AllocationState,
    decisions: Vec<Decision>,
    processed: BTreeSet<UserId>,
    last_submission: usize,
    procurement_revenue: Vec<Vec<f64>>,
}

impl<'a> OnlineMechanism<'a> {
    /// `bounds` are re-scaled to this instance's aggregate `R` and must keep
    /// `L_g` above every grid price.
    pub fn new(
        instance: &'a Instance,
        bounds: ValuationBounds,
        levels: LevelSet,
        forecast: ForecastMode,
    ) -> Result<Self, MechanismError> {
        let bounds = bounds.for_facilities(instance.facilities());
        bounds.check(instance.facilities())?;
        if let ForecastMode::Interval(f) = &forecast {
            if f.len() != instance.facilities().len() {
                return Err(MechanismError::ForecastCount {
                    expected: instance.facilities().len(),
                    got: f.len(),
                });
            }
        }
        Ok(Self {
            instance,
            bounds,
            levels,
            forecast,
            state: AllocationState::new(instance),
            decisions: Vec::new(),
            processed: BTreeSet::new(),
            last_submission: 0,
            procurement_revenue: vec![vec![0.0; instance.horizon()]; instance.facilities().len()],
        })
    }

    pub fn bounds(&self) -> &ValuationBounds {
        &self.bounds
    }

    pub fn state(&self) -> &AllocationState {
        &self.state
    }

    pub fn decisions(&self) -> &[Decision] {
        &self.decisions
    }

    /// Procurement payments collected so far, `[facility index][slot]`.
    pub fn procurement_revenue(&self) -> &[Vec<f64>] {
        &self.procurement_revenue
    }

    fn pricer(&self, t_current: usize) -> Pricer<'_> {
        let view = match &self.forecast {
            ForecastMode::Perfect => SolarView::Realized,
            ForecastMode::Interval(f) => SolarView::Forecast {
                forecasts: f,
                t_current,
            },
        };
        Pricer::new(self.instance, &self.state, &self.bounds, view)
    }

    /// The quote `user` would receive now, without committing anything.
    pub fn quote(&self, user: &UserRequest) -> Quote {
        best_option(user, &self.pricer(user.submission_slot), self.levels)
    }

    fn check_user(&self, user: &UserRequest) -> Result<(), MechanismError> {
        let invalid = |reason: &str| MechanismError::InvalidUser {
            user: user.id,
            reason: reason.into(),
        };
        if self.processed.contains(&user.id) {
            return Err(MechanismError::Duplicate(user.id));
        }
        if user.submission_slot < self.last_submission {
            return Err(MechanismError::OutOfOrder {
                user: user.id,
                submitted: user.submission_slot,
                previous: self.last_submission,
            });
        }
        if user.arrival_slot > user.departure_slot || user.departure_slot >= self.instance.horizon() {
            return Err(invalid("stay outside the horizon"));
        }
        if user.submission_slot > user.arrival_slot {
            return Err(invalid("submitted after arrival"));
        }
        if user.energy == 0 {
            return Err(invalid("energy demand must be positive"));
        }
        if user.valuations.is_empty() || user.preferred().any(|l| self.instance.facility(l).is_none()) {
            return Err(invalid("preferred facilities must exist"));
        }
        Ok(())
    }

    /// Admits or rejects one arrival. Prices are frozen for the evaluation
    /// and move only after an admission is committed.
    pub fn process_arrival(&mut self, user: &UserRequest) -> Result<Decision, MechanismError> {
        self.check_user(user)?;
        let pricer = self.pricer(user.submission_slot);
        let quote = best_option(user, &pricer, self.levels);
        let decision = match quote.option {
            Some(option) if quote.utility > crate::model::CURRENCY_EPS => {
                let charges = pricer.procurement_charges(&option);
                let fi = self.instance.facility_index(option.facility).expect("checked user");
                self.state
                    .commit(self.instance, user.id, option.clone(), quote.payment)?;
                for (t, amount) in charges {
                    self.procurement_revenue[fi][t] += amount;
                }
                Decision {
                    user: user.id,
                    utility: quote.utility,
                    option: Some(option),
                    payment: Some(quote.payment),
                }
            }
            _ => Decision::rejected(user.id),
        };
        self.processed.insert(user.id);
        self.last_submission = user.submission_slot;
        self.decisions.push(decision.clone());
        Ok(decision)
    }

    pub fn summary(&self) -> WelfareSummary {
        WelfareSummary::compute(self.instance, &self.state, &self.decisions)
    }

    /// Slots whose collected procurement payments fall short of the
    /// electricity cost at the final demand: `(facility index, slot, revenue, cost)`.
    pub fn cost_shortfalls(&self) -> Vec<(usize, usize, f64, f64)> {
        let mut out = Vec::new();
        for (fi, f) in self.instance.facilities().iter().enumerate() {
            for t in 0..self.instance.horizon() {
                let cost = operational_cost(f64::from(self.state.procurement_demand(fi, t)), t, f);
                let revenue = self.procurement_revenue[fi][t];
                if revenue + crate::model::CURRENCY_EPS < cost {
                    out.push((fi, t, revenue, cost));
                }
            }
        }
        out
    }

    pub fn finish(self) -> RunOutcome {
        let summary = self.summary();
        RunOutcome {
            state: self.state,
            decisions: self.decisions,
            summary,
            procurement_revenue: self.procurement_revenue,
        }
    }
}

#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub state: AllocationState,
    pub decisions: Vec<Decision>,
    pub summary: WelfareSummary,
    pub procurement_revenue: Vec<Vec<f64>>,
}

/// Runs the mechanism over the instance's users in their stored order,
/// which must be non-decreasing in submission slot.
pub fn run_sequence(
    instance: &Instance,
    bounds: &ValuationBounds,
    levels: LevelSet,
    forecast: ForecastMode,
) -> Result<RunOutcome, MechanismError> {
    let mut mech = OnlineMechanism::new(instance, *bounds, levels, forecast)?;
    for user in instance.users() {
        mech.process_arrival(user)?;
    }
    Ok(mech.finish())
}
