//! Configuration-driven experiment runner producing versioned reports.

pub mod config;
pub mod experiments;
pub mod report;

use std::time::Instant;

pub use config::{Budget, Experiment, ExperimentConfig, QuadratureSizes};
pub use report::{Bound, Check, Quantity, Report, Timing, SCHEMA_VERSION};

use crate::error::{Error, Result};
use experiments::Session;

/// Runs the configured experiment (every experiment for `verify-all`).
pub fn run(cfg: &ExperimentConfig) -> Result<Report> {
    cfg.validate()?;
    let start = Instant::now();
    let mut session = Session::new(cfg);
    session.run(cfg.experiment)?;
    if let Some(unknown) = cfg.tolerances.keys().find(|k| !session.checks.iter().any(|c| &c.name == *k)) {
        return Err(Error::Config(format!("tolerance override `{unknown}` matches no check")));
    }
    let mut inputs = cfg.clone();
    inputs.output = None;
    inputs.mc_samples = Some(cfg.samples());
    let all_passed = session.checks.iter().all(|c| c.passed);
    Ok(Report {
        schema_version: SCHEMA_VERSION,
        code_version: env!("CARGO_PKG_VERSION").to_string(),
        experiment: cfg.experiment,
        inputs,
        checks: session.checks,
        quantities: session.quantities,
        all_passed,
        timing: Timing { wall_seconds: start.elapsed().as_secs_f64(), threads: crate::par::current_threads() },
    })
}
