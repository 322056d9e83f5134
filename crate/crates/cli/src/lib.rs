//! Scenario files, pipeline orchestration and reports for `potmeter`.

pub mod config;
pub mod report;
pub mod run;

pub use config::{ConfigError, Pipeline, ScenarioConfig};
pub use report::RunReport;
pub use run::{run_scenario, run_scenario_with, PipelineError, RunError, RunOptions};

/// Environment variable capping the worker count; `0` or unset means automatic.
pub const THREADS_ENV: &str = "POTMETER_THREADS";

/// Reads [`THREADS_ENV`]; `Ok(None)` means automatic.
pub fn threads_from_env() -> Result<Option<usize>, ConfigError> {
    match std::env::var(THREADS_ENV) {
        Err(_) => Ok(None),
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(0) => Ok(None),
            Ok(n) => Ok(Some(n)),
            Err(_) => Err(ConfigError::new(THREADS_ENV, format!("expected a non-negative integer, got {v:?}"))),
        },
    }
}
