//! Versioned JSON report with a flat CSV companion.

use std::path::Path;

use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use super::config::{Experiment, ExperimentConfig};
use crate::error::{Error, Result};

/// Bumped whenever a field is renamed, removed or changes meaning.
pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Bound {
    AtMost,
    AtLeast,
}

impl Bound {
    pub fn holds(self, metric: f64, tolerance: f64) -> bool {
        match self {
            Bound::AtMost => metric <= tolerance,
            Bound::AtLeast => metric >= tolerance,
        }
    }

    fn symbol(self) -> &'static str {
        match self {
            Bound::AtMost => "<=",
            Bound::AtLeast => ">=",
        }
    }
}

/// One pass/fail comparison of `metric` against `tolerance`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Check {
    /// Acceptance criterion this check belongs to; `None` for supporting checks.
    pub criterion: Option<u8>,
    pub experiment: Experiment,
    pub name: String,
    pub metric: f64,
    pub bound: Bound,
    pub tolerance: f64,
    pub passed: bool,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub estimate: Option<Complex64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub target: Option<Complex64>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<f64>,
}

impl Check {
    pub fn with_estimate(&mut self, z: impl Into<Complex64>) -> &mut Self {
        self.estimate = Some(z.into());
        self
    }

    pub fn with_target(&mut self, z: impl Into<Complex64>) -> &mut Self {
        self.target = Some(z.into());
        self
    }

    pub fn with_stderr(&mut self, s: f64) -> &mut Self {
        self.stderr = Some(s);
        self
    }

    pub fn summary(&self) -> String {
        let crit = self.criterion.map_or("-".to_string(), |c| c.to_string());
        format!(
            "[{}] #{crit} {}: {:.4e} {} {:.4e}",
            if self.passed { "PASS" } else { "FAIL" },
            self.name,
            self.metric,
            self.bound.symbol(),
            self.tolerance
        )
    }
}

/// A reported number that is not itself compared against a tolerance.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Quantity {
    pub experiment: Experiment,
    pub name: String,
    pub value: f64,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub stderr: Option<f64>,
}

/// Run-dependent fields, kept apart so the rest of the report is reproducible.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Timing {
    pub wall_seconds: f64,
    pub threads: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Report {
    pub schema_version: u32,
    pub code_version: String,
    pub experiment: Experiment,
    /// The configuration as run, with seed and sample count resolved.
    pub inputs: ExperimentConfig,
    pub checks: Vec<Check>,
    pub quantities: Vec<Quantity>,
    pub all_passed: bool,
    pub timing: Timing,
}

impl Report {
    pub fn failing(&self) -> impl Iterator<Item = &Check> {
        self.checks.iter().filter(|c| !c.passed)
    }

    pub fn to_json(&self) -> Result<String> {
        serde_json::to_string_pretty(self).map_err(|e| Error::Config(e.to_string()))
    }

    /// One row per check.
    pub fn to_csv(&self) -> Result<String> {
        let mut w = csv::Writer::from_writer(Vec::new());
        let csv_err = |e: csv::Error| Error::Config(e.to_string());
        w.write_record([
            "criterion",
            "experiment",
            "name",
            "metric",
            "bound",
            "tolerance",
            "passed",
            "estimate_re",
            "estimate_im",
            "target_re",
            "target_im",
            "stderr",
        ])
        .map_err(csv_err)?;
        let opt = |v: Option<f64>| v.map_or(String::new(), |x| x.to_string());
        for c in &self.checks {
            w.write_record([
                c.criterion.map_or(String::new(), |x| x.to_string()),
                c.experiment.to_string(),
                c.name.clone(),
                c.metric.to_string(),
                c.bound.symbol().to_string(),
                c.tolerance.to_string(),
                c.passed.to_string(),
                opt(c.estimate.map(|z| z.re)),
                opt(c.estimate.map(|z| z.im)),
                opt(c.target.map(|z| z.re)),
                opt(c.target.map(|z| z.im)),
                opt(c.stderr),
            ])
            .map_err(csv_err)?;
        }
        let bytes = w.into_inner().map_err(|e| Error::Config(e.to_string()))?;
        String::from_utf8(bytes).map_err(|e| Error::Config(e.to_string()))
    }

    /// Writes the JSON report to `path` and the CSV companion next to it.
    pub fn write(&self, path: &Path) -> Result<()> {
        let io = |e: std::io::Error| Error::Config(format!("{}: {e}", path.display()));
        if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
            std::fs::create_dir_all(dir).map_err(io)?;
        }
        std::fs::write(path, self.to_json()?).map_err(io)?;
        std::fs::write(path.with_extension("csv"), self.to_csv()?).map_err(io)?;
        Ok(())
    }
}
