//! Configuration, experiment drivers, investment sweep and bound
//! verification for the parkcharge mechanism.

pub mod config;
pub mod experiment;
pub mod investment;
pub mod verify;

pub use config::{Config, ConfigError, ForecastKind};
pub use experiment::{run_experiment, ExperimentError, ExperimentReport, Mode};
pub use investment::{investment_sweep, SweepReport};
pub use verify::{verify_bounds, VerifyReport};
