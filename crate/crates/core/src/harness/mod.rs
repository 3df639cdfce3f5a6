//! Configuration parsing and scenario execution for `aoi-lab`.

pub mod config;
pub mod scenario;

pub use config::{parse_config, ConfigError, Experiment, Scenario, ScenarioKind};
pub use scenario::{run_experiment, run_scenario, write_report, Check, Report, Table};
