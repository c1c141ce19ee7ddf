//! Online posted-price admission control and smart charging for EV parking
//! facilities with single-output multi-cable chargers.
//!
//! The crate is organized bottom-up:
//!
//! * [`model`]: time grid, facilities, requests, options and allocation state.
//! * [`pricing`]: marginal price functions, bounds, conjugates, ratio bounds.
//! * [`scheduler`]: posted-price quotes and option enumeration.
//! * [`mechanism`]: the online admission mechanism.
//! * [`oracle`]: exact offline solvers and the dual evaluator.
//! * [`baselines`]: first-come-first-serve and certainty-equivalent controllers.
//! * [`scenarios`]: seeded arrival traces, solar curves and forecasts.

pub mod baselines;
pub mod mechanism;
pub mod model;
pub mod oracle;
pub mod pricing;
pub mod scenarios;
pub mod scheduler;

pub use mechanism::{run_sequence, OnlineMechanism, RunOutcome, WelfareSummary};
pub use model::{
    AllocationState, Decision, FacilityConfig, FacilityId, Instance, LevelSet, ScheduleOption, TimeGrid, UserId,
    UserRequest, CURRENCY_EPS,
};
pub use pricing::{RatioBounds, ResourceBounds, SolarForecast, ValuationBounds};
