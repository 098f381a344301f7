use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::{Scenario, DEFAULT_MU_PATTERN, DEFAULT_REPS};
use crate::procedures::Procedure;

#[derive(Debug, Error)]
pub enum ConfigError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        source: std::io::Error,
    },
    #[error("invalid scenario config: {0}")]
    Parse(String),
}

/// A scenario grid as written in a TOML file.
///
/// ```toml
/// m = [64, 512]
/// pi0 = [0.0, 0.5, 1.0]
/// rho = [0.0]
/// q = 0.05
/// reps = 5000
/// master_seed = 1
/// procedures = ["BH", "MS"]
/// ```
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(default)]
    pub name: Option<String>,
    pub m: Vec<usize>,
    pub pi0: Vec<f64>,
    #[serde(default = "default_rho")]
    pub rho: Vec<f64>,
    #[serde(default = "default_q")]
    pub q: f64,
    #[serde(default = "default_reps")]
    pub reps: usize,
    #[serde(default)]
    pub master_seed: u64,
    #[serde(default = "default_mu")]
    pub mu_pattern: Vec<f64>,
    #[serde(default = "default_procedures")]
    pub procedures: Vec<Procedure>,
}

fn default_rho() -> Vec<f64> {
    vec![0.0]
}

fn default_q() -> f64 {
    0.05
}

fn default_reps() -> usize {
    DEFAULT_REPS
}

fn default_mu() -> Vec<f64> {
    DEFAULT_MU_PATTERN.to_vec()
}

fn default_procedures() -> Vec<Procedure> {
    vec![
        Procedure::Bh,
        Procedure::Ts,
        Procedure::Ms,
        Procedure::Sts,
        Procedure::Orc,
    ]
}

impl ExperimentConfig {
    pub fn from_toml_str(text: &str) -> Result<Self, ConfigError> {
        let config: Self = toml::from_str(text).map_err(|e| ConfigError::Parse(e.to_string()))?;
        config.check()?;
        Ok(config)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io {
            path: path.display().to_string(),
            source,
        })?;
        Self::from_toml_str(&text)
    }

    fn check(&self) -> Result<(), ConfigError> {
        if self.m.is_empty() || self.pi0.is_empty() || self.rho.is_empty() {
            return Err(ConfigError::Parse("m, pi0 and rho must be non-empty".into()));
        }
        if self.procedures.is_empty() {
            return Err(ConfigError::Parse("no procedures listed".into()));
        }
        for s in self.scenarios() {
            s.validate().map_err(|e| ConfigError::Parse(e.to_string()))?;
        }
        Ok(())
    }

    /// The grid in rho-major, then m, then pi0 order.
    pub fn scenarios(&self) -> Vec<Scenario> {
        let mut grid = Vec::with_capacity(self.rho.len() * self.m.len() * self.pi0.len());
        for &rho in &self.rho {
            for &m in &self.m {
                for &pi0 in &self.pi0 {
                    grid.push(Scenario {
                        m,
                        pi0,
                        rho,
                        q: self.q,
                        reps: self.reps,
                        master_seed: self.master_seed,
                        mu_pattern: self.mu_pattern.clone(),
                    });
                }
            }
        }
        grid
    }
}
