//! Scenario harness for `sigrt-core`: configuration, the bundled scenarios,
//! artifact files and their summary.

pub mod artifacts;
pub mod config;
pub mod scenarios;
pub mod trader;

pub use artifacts::{inspect, InspectError, Summary};
pub use config::{Config, ConfigError, ScenarioKind};
pub use scenarios::{run_scenario, Check, ScenarioError, ScenarioRun};
