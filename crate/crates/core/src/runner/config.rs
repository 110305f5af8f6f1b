//! TOML experiment configuration.
//!
//! ```toml
//! experiment = "resolution"
//! seed = 7
//! budget = "quick"        # or "full"
//! mc_samples = 200000     # overrides the budget default
//! n = 2                   # restrict multi-dimensional experiments to one n
//! alpha = 1.0
//! beta = 1.0
//! output = "reports/resolution.json"
//!
//! [quadrature]
//! grid_points = 2048
//! max_slices = 32
//!
//! [tolerances]
//! resolution-z-n2 = 4.0
//! ```

use std::collections::BTreeMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Overlap,
    CheckAlgebra,
    Kn,
    Resolution,
    Jacobian,
    Polarization,
    Geometry,
    Propagate,
    LowerSymbol,
    VerifyAll,
}

impl Experiment {
    /// Every experiment that `verify-all` runs, in run order.
    pub const SUITE: [Experiment; 9] = [
        Experiment::Overlap,
        Experiment::CheckAlgebra,
        Experiment::Kn,
        Experiment::Resolution,
        Experiment::Jacobian,
        Experiment::Polarization,
        Experiment::Geometry,
        Experiment::Propagate,
        Experiment::LowerSymbol,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Overlap => "overlap",
            Experiment::CheckAlgebra => "check-algebra",
            Experiment::Kn => "kn",
            Experiment::Resolution => "resolution",
            Experiment::Jacobian => "jacobian",
            Experiment::Polarization => "polarization",
            Experiment::Geometry => "geometry",
            Experiment::Propagate => "propagate",
            Experiment::LowerSymbol => "lower-symbol",
            Experiment::VerifyAll => "verify-all",
        }
    }

    /// Whether the experiment draws Monte Carlo samples and therefore needs a seed.
    pub fn uses_mc(self) -> bool {
        matches!(
            self,
            Experiment::CheckAlgebra
                | Experiment::Kn
                | Experiment::Resolution
                | Experiment::Jacobian
                | Experiment::LowerSymbol
                | Experiment::VerifyAll
        )
    }
}

impl fmt::Display for Experiment {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Experiment {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        Experiment::SUITE
            .into_iter()
            .chain([Experiment::VerifyAll])
            .find(|e| e.name() == s)
            .ok_or_else(|| Error::Config(format!("unknown experiment `{s}`")))
    }
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Budget {
    Quick,
    #[default]
    Full,
}

impl Budget {
    pub fn mc_samples(self) -> usize {
        match self {
            Budget::Quick => 100_000,
            Budget::Full => 1_000_000,
        }
    }
}

impl FromStr for Budget {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "quick" => Ok(Budget::Quick),
            "full" => Ok(Budget::Full),
            _ => Err(Error::Config(format!("unknown budget `{s}`, expected quick or full"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct QuadratureSizes {
    /// Log-grid points for the 1-D closed-form vs grid comparison.
    pub grid_points: usize,
    /// Log-grid points for the eigendecomposition propagator.
    pub propagator_points: usize,
    /// `k` grid points or Mellin nodes for time slicing.
    pub spectral_points: usize,
    /// Reduced-integral nodes for time slicing.
    pub scale_nodes: usize,
    /// Largest number of inserted resolutions; the slice sweep doubles up to it.
    pub max_slices: usize,
}

impl Default for QuadratureSizes {
    fn default() -> Self {
        Self { grid_points: 2048, propagator_points: 1024, spectral_points: 4096, scale_nodes: 4000, max_slices: 32 }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub alpha: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub beta: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub mc_samples: Option<usize>,
    #[serde(default)]
    pub budget: Budget,
    #[serde(default)]
    pub quadrature: QuadratureSizes,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub output: Option<PathBuf>,
    /// Per-check tolerance overrides keyed by check name.
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub tolerances: BTreeMap<String, f64>,
}

pub const MIN_MC_SAMPLES: usize = 10_000;
pub const MAX_MC_SAMPLES: usize = 100_000_000;

fn in_range<T: PartialOrd + fmt::Display>(name: &str, v: T, lo: T, hi: T) -> Result<()> {
    if v >= lo && v <= hi {
        Ok(())
    } else {
        Err(Error::Config(format!("{name} = {v} outside [{lo}, {hi}]")))
    }
}

impl ExperimentConfig {
    pub fn new(experiment: Experiment) -> Self {
        Self {
            experiment,
            n: None,
            alpha: None,
            beta: None,
            seed: None,
            mc_samples: None,
            budget: Budget::default(),
            quadrature: QuadratureSizes::default(),
            output: None,
            tolerances: BTreeMap::new(),
        }
    }

    pub fn from_toml_str(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
        Self::from_toml_str(&text)
    }

    /// Samples per Monte Carlo estimate.
    pub fn samples(&self) -> usize {
        self.mc_samples.unwrap_or(self.budget.mc_samples())
    }

    pub fn validate(&self) -> Result<()> {
        if let Some(n) = self.n {
            in_range("n", n, 1, 3)?;
        }
        if let Some(a) = self.alpha {
            in_range("alpha", a, 0.05, 50.0)?;
        }
        if let Some(b) = self.beta {
            in_range("beta", b, 0.05, 50.0)?;
        }
        if let Some(s) = self.mc_samples {
            in_range("mc_samples", s, MIN_MC_SAMPLES, MAX_MC_SAMPLES)?;
        }
        let q = &self.quadrature;
        in_range("quadrature.grid_points", q.grid_points, 64, 1 << 16)?;
        in_range("quadrature.propagator_points", q.propagator_points, 64, 4096)?;
        in_range("quadrature.spectral_points", q.spectral_points, 16, 1 << 20)?;
        in_range("quadrature.scale_nodes", q.scale_nodes, 16, 1 << 20)?;
        in_range("quadrature.max_slices", q.max_slices, 1, 1024)?;
        for (k, v) in &self.tolerances {
            if !(v.is_finite() && *v >= 0.0) {
                return Err(Error::Config(format!("tolerance `{k}` = {v} is not a finite non-negative number")));
            }
        }
        if self.experiment.uses_mc() && self.seed.is_none() {
            return Err(Error::Config(format!("experiment `{}` draws samples and needs a seed", self.experiment)));
        }
        Ok(())
    }
}
