//! Experiment configuration.
//!
//! Configs are TOML files; every key is optional and falls back to the desk
//! preset. Example:
//!
//! ```toml
//! field = "hermite2d:zeta=10"
//! radius = 0.5
//! spacing = 0.08
//! samples = 400
//! seed = 1
//! method = "pmp"
//! reference_factor = 4
//!
//! [target]
//! q = [[3.0, 1.0], [1.0, 2.0]]
//! v = [0.5, 0.5]
//! c = 2.0
//!
//! [trainer]
//! steps = 32
//! beta = 5e-4
//! rho0 = 1.0
//! tau = 0.5
//! max_iter = 500
//! rho_min = 1e-10
//! cost_tol = 1e-9
//! rho_reset = false
//! ```

use std::path::Path;

use anyhow::{bail, Context, Result};
use otflow_core::{ControlledField, FieldFamily, TrainerConfig};
use serde::{Deserialize, Serialize};

use crate::experiment::TargetMap;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize, clap::ValueEnum)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    /// Iterative maximum principle.
    Pmp,
    /// Gradient descent with the adjoint gradient.
    Gd,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TargetConfig {
    pub q: [[f64; 2]; 2],
    pub v: [f64; 2],
    pub c: f64,
}

impl Default for TargetConfig {
    fn default() -> Self {
        let t = TargetMap::default();
        Self { q: t.q, v: t.v, c: t.c }
    }
}

impl TargetConfig {
    pub fn map(&self) -> TargetMap {
        TargetMap { q: self.q, v: self.v, c: self.c }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct ExperimentConfig {
    pub field: FieldFamily,
    /// Disc radius of the source measure.
    pub radius: f64,
    /// Triangulation spacing of the source measure.
    pub spacing: f64,
    /// Number of target samples `N₂`.
    pub samples: usize,
    pub seed: u64,
    pub method: Method,
    /// Refinement of the reference measures used for the error decomposition;
    /// `0` skips the decomposition.
    pub reference_factor: usize,
    pub target: TargetConfig,
    /// Optimizer settings; `steps` is `M` and `beta` is `β`.
    pub trainer: TrainerConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self::desk()
    }
}

impl ExperimentConfig {
    /// Scaled-down instance that runs in seconds.
    pub fn desk() -> Self {
        Self {
            field: FieldFamily::hermite2d(10.0).expect("valid zeta"),
            radius: 0.5,
            spacing: 0.08,
            samples: 400,
            seed: 1,
            method: Method::Pmp,
            reference_factor: 4,
            target: TargetConfig::default(),
            trainer: TrainerConfig::default(),
        }
    }

    /// Full-size instance: 571 source atoms and 1500 target samples.
    pub fn paper_scale() -> Self {
        Self {
            spacing: 0.04,
            samples: 1500,
            ..Self::desk()
        }
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        let cfg: Self = toml::from_str(text).context("invalid config")?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .with_context(|| format!("reading config {}", path.display()))?;
        Self::from_toml(&text).with_context(|| format!("in {}", path.display()))
    }

    pub fn to_toml(&self) -> Result<String> {
        Ok(toml::to_string(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.radius > 0.0 && self.radius.is_finite()) {
            bail!("radius must be positive, got {}", self.radius);
        }
        if !(self.spacing > 0.0 && self.spacing.is_finite()) {
            bail!("spacing must be positive, got {}", self.spacing);
        }
        if self.samples < 1 {
            bail!("samples must be at least 1");
        }
        if self.trainer.steps < 2 {
            bail!("steps must be at least 2, got {}", self.trainer.steps);
        }
        if self.field.dim() != 2 {
            bail!("the disc experiment needs a planar field, got {}", self.field);
        }
        self.trainer.validate()?;
        Ok(())
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn empty_file_is_desk_preset() {
        assert_eq!(ExperimentConfig::from_toml("").unwrap(), ExperimentConfig::desk());
    }

    #[test]
    fn round_trips_through_toml() {
        let cfg = ExperimentConfig::paper_scale();
        let text = cfg.to_toml().unwrap();
        assert_eq!(ExperimentConfig::from_toml(&text).unwrap(), cfg);
    }

    #[test]
    fn partial_override() {
        let cfg = ExperimentConfig::from_toml(
            "samples = 50\nfield = \"hermite2d:zeta=5\"\n[trainer]\nbeta = 0.01\n",
        )
        .unwrap();
        assert_eq!(cfg.samples, 50);
        assert_eq!(cfg.trainer.beta, 0.01);
        assert_eq!(cfg.trainer.steps, 32);
        assert_eq!(cfg.field.channels(), 14);
    }

    #[test]
    fn rejects_invalid() {
        assert!(ExperimentConfig::from_toml("spacing = -1.0").is_err());
        assert!(ExperimentConfig::from_toml("samples = 0").is_err());
        assert!(ExperimentConfig::from_toml("[trainer]\nsteps = 1").is_err());
        assert!(ExperimentConfig::from_toml("field = \"translations:n=3\"").is_err());
        assert!(ExperimentConfig::from_toml("bogus = 1").is_err());
    }
}
