//! Command-line front end: scenario files in, CSV tables and a manifest out.

pub mod config;
pub mod error;
pub mod output;
pub mod run;

pub use config::{parse_config, parse_config_str, Scenario, ScenarioConfig, ScenarioKind};
pub use error::{CliError, ConfigIssue};
pub use output::{OutputFile, RunManifest};
pub use run::run_scenario;
