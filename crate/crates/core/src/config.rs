//! JSON model configuration.
//!
//! ```json
//! {
//!   "bio":  { "mortality": 0.15, "r0": 0.543365, "half_saturation": 196.3923,
//!             "shock_lo": 0.89, "shock_hi": 1.06 },
//!   "econ": { "price": 4300000.0, "fixed_cost": 5000000.0, "effort_cost": 200000.0,
//!             "catchability": 9.07979e-7, "elasticity": 2.55465, "discount_rate": 0.05 },
//!   "grid": { "step": 0.25 },
//!   "horizon": 33,
//!   "x1": 90.989,
//!   "cpp_rate": 0.1277,
//!   "solver": { "interior_shocks": 3, "monotone_shortcut": true }
//! }
//! ```
//!
//! Only `bio` and `econ` are required. `grid.x_max` defaults to the
//! best-case carrying capacity rounded up to a node, `grid.x_ref` to one
//! step.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::model::{BioModel, EconModel, Grid, Horizon};
use crate::solver::SolverConfig;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridConfig {
    pub step: f64,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_max: Option<f64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub x_ref: Option<f64>,
}

impl Default for GridConfig {
    fn default() -> Self {
        GridConfig {
            step: 0.25,
            x_max: None,
            x_ref: None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub bio: BioModel,
    pub econ: EconModel,
    #[serde(default)]
    pub grid: GridConfig,
    #[serde(default = "default_horizon")]
    pub horizon: usize,
    #[serde(default = "default_x1")]
    pub x1: f64,
    #[serde(default = "default_cpp_rate")]
    pub cpp_rate: f64,
    #[serde(default)]
    pub solver: SolverConfig,
}

fn default_horizon() -> usize {
    33
}

fn default_x1() -> f64 {
    90.989
}

fn default_cpp_rate() -> f64 {
    0.1277
}

impl ModelConfig {
    /// Pacific halibut base case.
    pub fn table1() -> Self {
        ModelConfig {
            bio: BioModel::table1(),
            econ: EconModel::table1(),
            grid: GridConfig::default(),
            horizon: default_horizon(),
            x1: default_x1(),
            cpp_rate: default_cpp_rate(),
            solver: SolverConfig::default(),
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let cfg: ModelConfig = serde_json::from_str(text)?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: impl AsRef<Path>) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path)?)
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("config serializes")
    }

    pub fn validate(&self) -> Result<()> {
        self.bio.validate()?;
        self.econ.validate()?;
        self.grid()?;
        self.horizon()?;
        if !(self.x1 >= 0.0 && self.x1.is_finite()) {
            return Err(Error::invalid("x1", "must be finite and nonnegative"));
        }
        if !(0.0..=1.0).contains(&self.cpp_rate) {
            return Err(Error::invalid("cpp_rate", "must lie in [0, 1]"));
        }
        Ok(())
    }

    pub fn grid(&self) -> Result<Grid> {
        let g = &self.grid;
        let base = match g.x_max {
            Some(x_max) => Grid::new(x_max, g.step)?,
            None => Grid::for_model(&self.bio, g.step)?,
        };
        match g.x_ref {
            Some(x_ref) => Grid::with_reference(base.x_max, base.step, x_ref),
            None => Ok(base),
        }
    }

    pub fn horizon(&self) -> Result<Horizon> {
        Horizon::new(self.horizon)
    }
}
